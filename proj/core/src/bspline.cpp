#include "lrfit/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lrfit {

LocalKnots::LocalKnots(std::vector<double> v) : values(std::move(v)) {
  if (values.size() < 2) throw std::invalid_argument("local knot vector too short");
  for (size_t i = 0; i + 1 < values.size(); ++i)
    if (values[i + 1] < values[i])
      throw std::invalid_argument("local knot vector decreasing");
  if (!(values.back() > values.front()))
    throw std::invalid_argument("degenerate local knot vector");
}

GlobalKnotVector::GlobalKnotVector(std::vector<double> v, int p)
    : values(std::move(v)), degree(p) {
  if (p < 0) throw std::invalid_argument("negative degree");
  if (static_cast<int>(values.size()) < p + 2)
    throw std::invalid_argument("global knot vector too short");
  for (size_t i = 0; i + 1 < values.size(); ++i)
    if (values[i + 1] < values[i])
      throw std::invalid_argument("global knot vector decreasing");
  for (int i = 0; i + p + 1 < static_cast<int>(values.size()); ++i)
    if (!(values[i + p + 1] > values[i]))
      throw std::invalid_argument("knot multiplicity exceeds degree+1");
}

LocalKnots GlobalKnotVector::local(int i) const {
  if (i < 0 || i >= numBasis()) throw std::out_of_range("basis index");
  return LocalKnots(std::vector<double>(values.begin() + i, values.begin() + i + degree + 2));
}

GlobalKnotVector GlobalKnotVector::uniformClamped(double a, double b, int n, int p) {
  if (n < p + 1) throw std::invalid_argument("need at least degree+1 basis functions");
  if (!(b > a)) throw std::invalid_argument("empty interval");
  std::vector<double> v;
  v.reserve(n + p + 1);
  for (int i = 0; i <= p; ++i) v.push_back(a);
  int spans = n - p;
  for (int i = 1; i < spans; ++i) v.push_back(a + (b - a) * i / spans);
  for (int i = 0; i <= p; ++i) v.push_back(b);
  return GlobalKnotVector(std::move(v), p);
}

namespace {

double evalLocalValue(const double* k, int p, double u, bool closedRight) {
  if (p == 0) {
    if (closedRight) return (k[0] < u && u <= k[1]) ? 1.0 : 0.0;
    return (k[0] <= u && u < k[1]) ? 1.0 : 0.0;
  }
  double r = 0.0;
  double d1 = k[p] - k[0];
  if (d1 > 0.0) r += (u - k[0]) / d1 * evalLocalValue(k, p - 1, u, closedRight);
  double d2 = k[p + 1] - k[1];
  if (d2 > 0.0) r += (k[p + 1] - u) / d2 * evalLocalValue(k + 1, p - 1, u, closedRight);
  return r;
}

double evalLocalDeriv(const double* k, int p, double u, int deriv, bool closedRight) {
  if (deriv == 0) return evalLocalValue(k, p, u, closedRight);
  if (p == 0) return 0.0;
  double r = 0.0;
  double d1 = k[p] - k[0];
  if (d1 > 0.0) r += p / d1 * evalLocalDeriv(k, p - 1, u, deriv - 1, closedRight);
  double d2 = k[p + 1] - k[1];
  if (d2 > 0.0) r -= p / d2 * evalLocalDeriv(k + 1, p - 1, u, deriv - 1, closedRight);
  return r;
}

}  // namespace

double evalUnivariate(const LocalKnots& knots, int degree, double u, int deriv,
                      bool closedRight) {
  if (degree != knots.degree())
    throw std::invalid_argument("degree does not match local knot count");
  if (deriv < 0) throw std::invalid_argument("negative derivative order");
  if (!std::isfinite(u)) throw std::invalid_argument("non-finite parameter");
  if (u < knots.front() || u > knots.back()) return 0.0;
  return evalLocalDeriv(knots.values.data(), degree, u, deriv, closedRight);
}

double evalUnivariateRaw(const double* knots, int degree, double u, int deriv,
                         bool closedRight) {
  if (u < knots[0] || u > knots[degree + 1]) return 0.0;
  return evalLocalDeriv(knots, degree, u, deriv, closedRight);
}

KnotInsertion insertKnot(const LocalKnots& knots, int degree, double a) {
  if (degree != knots.degree())
    throw std::invalid_argument("degree does not match local knot count");
  const auto& k = knots.values;
  int p = degree;
  if (!(a > k.front() && a < k.back()))
    throw std::domain_error("knot outside open support");
  std::vector<double> merged = k;
  merged.insert(std::upper_bound(merged.begin(), merged.end(), a), a);
  KnotInsertion out;
  out.k1 = LocalKnots(std::vector<double>(merged.begin(), merged.begin() + p + 2));
  out.k2 = LocalKnots(std::vector<double>(merged.end() - (p + 2), merged.end()));
  out.alpha1 = (a >= k[p]) ? 1.0 : (a - k[0]) / (k[p] - k[0]);
  out.alpha2 = (a <= k[1]) ? 1.0 : (k[p + 1] - a) / (k[p + 1] - k[1]);
  return out;
}

ScaledTensorBSpline::ScaledTensorBSpline(LocalKnots uk, LocalKnots vk, double s, double c)
    : uknots(std::move(uk)), vknots(std::move(vk)), scale(s), coef(c) {
  degreeU = uknots.degree();
  degreeV = vknots.degree();
  if (!(scale > 0.0) || scale > 1.0 + 1e-9)
    throw std::invalid_argument("scaling factor outside (0,1]");
}

Rect ScaledTensorBSpline::support() const {
  return {uknots.front(), uknots.back(), vknots.front(), vknots.back()};
}

double ScaledTensorBSpline::eval(double u, double v, int du, int dv,
                                 bool closedRightU, bool closedRightV) const {
  double bu = evalUnivariate(uknots, degreeU, u, du, closedRightU);
  if (bu == 0.0) return 0.0;
  double bv = evalUnivariate(vknots, degreeV, v, dv, closedRightV);
  return scale * bu * bv;
}

std::pair<double, double> ScaledTensorBSpline::greville() const {
  double su = 0.0, sv = 0.0;
  for (int j = 1; j <= degreeU; ++j) su += uknots.values[j];
  for (int j = 1; j <= degreeV; ++j) sv += vknots.values[j];
  return {degreeU > 0 ? su / degreeU : uknots.values[0],
          degreeV > 0 ? sv / degreeV : vknots.values[0]};
}

BasisValues basisValues(const GlobalKnotVector& kv, double u, int deriv) {
  const auto& t = kv.values;
  int p = kv.degree;
  int n = kv.numBasis();
  bool closedRight = (u >= kv.domainMax());
  int k;
  if (closedRight) {
    k = n - 1;
    while (k > p && t[k] >= t[k + 1]) --k;
  } else {
    k = static_cast<int>(std::upper_bound(t.begin(), t.end(), u) - t.begin()) - 1;
    k = std::clamp(k, p, n - 1);
  }
  BasisValues out;
  out.first = k - p;
  for (int i = 0; i <= p; ++i)
    out.v[i] = evalLocalDeriv(t.data() + out.first + i, p, u, deriv, closedRight);
  return out;
}

TPSurface::TPSurface(GlobalKnotVector uk, GlobalKnotVector vk, std::vector<double> c)
    : uknots(std::move(uk)), vknots(std::move(vk)), coefs(std::move(c)) {
  if (static_cast<size_t>(n1()) * n2() != coefs.size())
    throw std::invalid_argument("coefficient grid does not match knot counts");
}

double TPSurface::eval(double u, double v, int du, int dv) const {
  if (u < uknots.domainMin() || u > uknots.domainMax() ||
      v < vknots.domainMin() || v > vknots.domainMax())
    throw std::domain_error("parameter outside surface domain");
  BasisValues bu = basisValues(uknots, u, du);
  BasisValues bv = basisValues(vknots, v, dv);
  double sum = 0.0;
  for (int j = 0; j <= vknots.degree; ++j) {
    double bvj = bv.v[j];
    if (bvj == 0.0) continue;
    for (int i = 0; i <= uknots.degree; ++i)
      sum += coef(bu.first + i, bv.first + j) * bu.v[i] * bvj;
  }
  return sum;
}

namespace {

// Boehm knot insertion on a coefficient sequence with given stride.
void curveInsert(std::vector<double>& knots, int p, double a,
                 const std::vector<double>& c, std::vector<double>& cnew,
                 int n, int stride, int offset) {
  int k = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), a) - knots.begin()) - 1;
  for (int i = 0; i <= n; ++i) {
    double val;
    if (i <= k - p) {
      val = c[offset + i * stride];
    } else if (i <= k) {
      double den = knots[i + p] - knots[i];
      double alpha = den > 0.0 ? (a - knots[i]) / den : 1.0;
      val = alpha * c[offset + i * stride] + (1.0 - alpha) * c[offset + (i - 1) * stride];
    } else {
      val = c[offset + (i - 1) * stride];
    }
    cnew[offset + i * stride] = val;
  }
}

}  // namespace

void TPSurface::insertKnotU(double a) {
  if (!(a > uknots.domainMin() && a < uknots.domainMax()))
    throw std::domain_error("knot outside domain interior");
  int p = uknots.degree;
  int N1 = n1(), N2 = n2();
  std::vector<double> cnew(static_cast<size_t>(N1 + 1) * N2);
  for (int j = 0; j < N2; ++j) {
    // re-pack row j: stride 1 in old, rows of length N1 vs N1+1
    std::vector<double> row(coefs.begin() + static_cast<size_t>(j) * N1,
                            coefs.begin() + static_cast<size_t>(j + 1) * N1);
    std::vector<double> rowNew(N1 + 1);
    curveInsert(uknots.values, p, a, row, rowNew, N1, 1, 0);
    std::copy(rowNew.begin(), rowNew.end(), cnew.begin() + static_cast<size_t>(j) * (N1 + 1));
  }
  auto vals = uknots.values;
  vals.insert(std::upper_bound(vals.begin(), vals.end(), a), a);
  uknots = GlobalKnotVector(std::move(vals), p);
  coefs = std::move(cnew);
}

void TPSurface::insertKnotV(double a) {
  if (!(a > vknots.domainMin() && a < vknots.domainMax()))
    throw std::domain_error("knot outside domain interior");
  int p = vknots.degree;
  int N1 = n1(), N2 = n2();
  std::vector<double> cnew(static_cast<size_t>(N1) * (N2 + 1));
  for (int i = 0; i < N1; ++i)
    curveInsert(vknots.values, p, a, coefs, cnew, N2, N1, i);
  auto vals = vknots.values;
  vals.insert(std::upper_bound(vals.begin(), vals.end(), a), a);
  vknots = GlobalKnotVector(std::move(vals), p);
  coefs = std::move(cnew);
}

std::pair<TPSurface, TPSurface> TPSurface::splitU(double a) const {
  int p = uknots.degree;
  TPSurface s = *this;
  int mult = static_cast<int>(std::count(s.uknots.values.begin(), s.uknots.values.end(), a));
  for (int i = mult; i <= p; ++i) s.insertKnotU(a);
  const auto& t = s.uknots.values;
  int m = static_cast<int>(std::lower_bound(t.begin(), t.end(), a) - t.begin());
  int N1 = s.n1(), N2 = s.n2();
  GlobalKnotVector lk(std::vector<double>(t.begin(), t.begin() + m + p + 1), p);
  GlobalKnotVector rk(std::vector<double>(t.begin() + m, t.end()), p);
  std::vector<double> lc(static_cast<size_t>(m) * N2), rc(static_cast<size_t>(N1 - m) * N2);
  for (int j = 0; j < N2; ++j) {
    for (int i = 0; i < m; ++i) lc[i + static_cast<size_t>(j) * m] = s.coef(i, j);
    for (int i = m; i < N1; ++i) rc[(i - m) + static_cast<size_t>(j) * (N1 - m)] = s.coef(i, j);
  }
  return {TPSurface(lk, s.vknots, std::move(lc)), TPSurface(rk, s.vknots, std::move(rc))};
}

std::pair<TPSurface, TPSurface> TPSurface::splitV(double a) const {
  int p = vknots.degree;
  TPSurface s = *this;
  int mult = static_cast<int>(std::count(s.vknots.values.begin(), s.vknots.values.end(), a));
  for (int i = mult; i <= p; ++i) s.insertKnotV(a);
  const auto& t = s.vknots.values;
  int m = static_cast<int>(std::lower_bound(t.begin(), t.end(), a) - t.begin());
  int N1 = s.n1(), N2 = s.n2();
  GlobalKnotVector bk(std::vector<double>(t.begin(), t.begin() + m + p + 1), p);
  GlobalKnotVector tk(std::vector<double>(t.begin() + m, t.end()), p);
  std::vector<double> bc(s.coefs.begin(), s.coefs.begin() + static_cast<size_t>(m) * N1);
  std::vector<double> tc(s.coefs.begin() + static_cast<size_t>(m) * N1, s.coefs.end());
  return {TPSurface(s.uknots, bk, std::move(bc)), TPSurface(s.uknots, tk, std::move(tc))};
}

TPSurface TPSurface::derivativeU() const {
  int p = uknots.degree;
  if (p == 0) throw std::logic_error("derivative of degree-0 surface");
  int N1 = n1(), N2 = n2();
  GlobalKnotVector dk(std::vector<double>(uknots.values.begin() + 1, uknots.values.end() - 1),
                      p - 1);
  std::vector<double> dc(static_cast<size_t>(N1 - 1) * N2);
  for (int j = 0; j < N2; ++j)
    for (int i = 0; i < N1 - 1; ++i) {
      double den = uknots.values[i + p + 1] - uknots.values[i + 1];
      dc[i + static_cast<size_t>(j) * (N1 - 1)] =
          den > 0.0 ? p * (coef(i + 1, j) - coef(i, j)) / den : 0.0;
    }
  return TPSurface(dk, vknots, std::move(dc));
}

TPSurface TPSurface::derivativeV() const {
  int p = vknots.degree;
  if (p == 0) throw std::logic_error("derivative of degree-0 surface");
  int N1 = n1(), N2 = n2();
  GlobalKnotVector dk(std::vector<double>(vknots.values.begin() + 1, vknots.values.end() - 1),
                      p - 1);
  std::vector<double> dc(static_cast<size_t>(N1) * (N2 - 1));
  for (int j = 0; j < N2 - 1; ++j)
    for (int i = 0; i < N1; ++i) {
      double den = vknots.values[j + p + 1] - vknots.values[j + 1];
      dc[i + static_cast<size_t>(j) * N1] =
          den > 0.0 ? p * (coef(i, j + 1) - coef(i, j)) / den : 0.0;
    }
  return TPSurface(uknots, dk, std::move(dc));
}

double TPSurface::coefMin() const { return *std::min_element(coefs.begin(), coefs.end()); }
double TPSurface::coefMax() const { return *std::max_element(coefs.begin(), coefs.end()); }

double Curve::eval(double u, int deriv) const {
  BasisValues b = basisValues(knots, u, deriv);
  double sum = 0.0;
  for (int i = 0; i <= knots.degree; ++i) sum += coefs[b.first + i] * b.v[i];
  return sum;
}

void Curve::insertKnot(double a) {
  int p = knots.degree;
  int n = static_cast<int>(coefs.size());
  std::vector<double> cnew(n + 1);
  curveInsert(knots.values, p, a, coefs, cnew, n, 1, 0);
  auto vals = knots.values;
  vals.insert(std::upper_bound(vals.begin(), vals.end(), a), a);
  knots = GlobalKnotVector(std::move(vals), p);
  coefs = std::move(cnew);
}

Curve Curve::derivative() const {
  int p = knots.degree;
  if (p == 0) {
    Curve c;
    c.knots = knots;
    c.coefs.assign(coefs.size(), 0.0);
    return c;
  }
  Curve d;
  d.knots = GlobalKnotVector(
      std::vector<double>(knots.values.begin() + 1, knots.values.end() - 1), p - 1);
  d.coefs.resize(coefs.size() - 1);
  for (size_t i = 0; i + 1 < coefs.size(); ++i) {
    double den = knots.values[i + p + 1] - knots.values[i + 1];
    d.coefs[i] = den > 0.0 ? p * (coefs[i + 1] - coefs[i]) / den : 0.0;
  }
  return d;
}

namespace {

void rootsRec(const Curve& c, double lo, double hi, double tol, std::vector<double>& out) {
  // coefficient range bound over the whole (clamped) sub-curve
  double cmin = *std::min_element(c.coefs.begin(), c.coefs.end());
  double cmax = *std::max_element(c.coefs.begin(), c.coefs.end());
  if (cmin > 0.0 || cmax < 0.0) return;
  if (hi - lo < tol) {
    out.push_back(0.5 * (lo + hi));
    return;
  }
  double mid = 0.5 * (lo + hi);
  Curve left = c, right = c;
  int p = c.knots.degree;
  {
    Curve s = c;
    int mult = static_cast<int>(std::count(s.knots.values.begin(), s.knots.values.end(), mid));
    for (int i = mult; i <= p; ++i) s.insertKnot(mid);
    const auto& t = s.knots.values;
    int m = static_cast<int>(std::lower_bound(t.begin(), t.end(), mid) - t.begin());
    left.knots = GlobalKnotVector(std::vector<double>(t.begin(), t.begin() + m + p + 1), p);
    left.coefs.assign(s.coefs.begin(), s.coefs.begin() + m);
    right.knots = GlobalKnotVector(std::vector<double>(t.begin() + m, t.end()), p);
    right.coefs.assign(s.coefs.begin() + m, s.coefs.end());
  }
  rootsRec(left, lo, mid, tol, out);
  rootsRec(right, mid, hi, tol, out);
}

}  // namespace

std::vector<double> Curve::roots(double tol) const {
  std::vector<double> raw;
  rootsRec(*this, knots.domainMin(), knots.domainMax(), tol, raw);
  // polish with bisection where a sign change brackets the root
  std::vector<double> out;
  double span = knots.domainMax() - knots.domainMin();
  for (double r : raw) {
    double a = std::max(knots.domainMin(), r - tol);
    double b = std::min(knots.domainMax(), r + tol);
    double fa = eval(a), fb = eval(b);
    if (fa * fb < 0.0) {
      for (int it = 0; it < 60; ++it) {
        double m = 0.5 * (a + b);
        double fm = eval(m);
        if (fa * fm <= 0.0) { b = m; fb = fm; } else { a = m; fa = fm; }
      }
      r = 0.5 * (a + b);
    }
    if (out.empty() || r - out.back() > 4.0 * tol * std::max(1.0, span))
      out.push_back(r);
  }
  return out;
}

std::vector<std::pair<int, double>> expandToBasis(const LocalKnots& local, int degree,
                                                  const GlobalKnotVector& target) {
  std::vector<std::pair<int, double>> acc;
  // recursive Boehm expansion until every piece is a window of the target
  struct Item { LocalKnots k; double f; };
  std::vector<Item> stack{{local, 1.0}};
  const auto& t = target.values;
  while (!stack.empty()) {
    Item it = std::move(stack.back());
    stack.pop_back();
    const auto& k = it.k.values;
    // find a target knot strictly inside the support that is under-represented
    double missing = 0.0;
    bool found = false;
    for (size_t i = 0; i < t.size() && !found; ++i) {
      double v = t[i];
      if (!(v > k.front() && v < k.back())) continue;
      auto multT = std::count(t.begin(), t.end(), v);
      auto multL = std::count(k.begin(), k.end(), v);
      if (multL < multT) { missing = v; found = true; }
      // skip over remaining copies
      while (i + 1 < t.size() && t[i + 1] == v) ++i;
    }
    if (found) {
      KnotInsertion ins = insertKnot(it.k, degree, missing);
      stack.push_back({std::move(ins.k1), it.f * ins.alpha1});
      stack.push_back({std::move(ins.k2), it.f * ins.alpha2});
      continue;
    }
    // locate window
    bool placed = false;
    for (int i = 0; i + degree + 1 < static_cast<int>(t.size()) && !placed; ++i) {
      if (std::equal(k.begin(), k.end(), t.begin() + i)) {
        acc.emplace_back(i, it.f);
        placed = true;
      }
    }
    if (!placed) throw std::logic_error("local knots not representable in target space");
  }
  std::sort(acc.begin(), acc.end());
  std::vector<std::pair<int, double>> out;
  for (auto& [i, f] : acc) {
    if (!out.empty() && out.back().first == i) out.back().second += f;
    else out.emplace_back(i, f);
  }
  return out;
}

}  // namespace lrfit
