#include "lrfit/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace lrfit {

namespace {

using P = std::pair<double, double>;

double dist(const P& a, const P& b) { return std::hypot(a.first - b.first, a.second - b.second); }

std::string fmt(double x) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

Rect tpDomain(const TPSurface& t) {
  return {t.uknots.domainMin(), t.uknots.domainMax(), t.vknots.domainMin(),
          t.vknots.domainMax()};
}

// boundary curve of a clamped TP surface; side 0: v=vmin, 1: v=vmax, 2: u=umin, 3: u=umax
Curve boundaryCurve(const TPSurface& t, int side) {
  Curve c;
  if (side < 2) {
    c.knots = t.uknots;
    int j = side == 0 ? 0 : t.n2() - 1;
    c.coefs.resize(t.n1());
    for (int i = 0; i < t.n1(); ++i) c.coefs[i] = t.coef(i, j);
  } else {
    c.knots = t.vknots;
    int i = side == 2 ? 0 : t.n1() - 1;
    c.coefs.resize(t.n2());
    for (int j = 0; j < t.n2(); ++j) c.coefs[j] = t.coef(i, j);
  }
  return c;
}

std::vector<P> edgeCrossings(const TPSurface& t, int side, double a, double tol) {
  Curve c = boundaryCurve(t, side);
  for (double& v : c.coefs) v -= a;
  Rect d = tpDomain(t);
  std::vector<P> out;
  for (double root : c.roots(tol)) {
    double r = side < 2 ? std::clamp(root, d.umin, d.umax) : std::clamp(root, d.vmin, d.vmax);
    switch (side) {
      case 0: out.push_back({r, d.vmin}); break;
      case 1: out.push_back({r, d.vmax}); break;
      case 2: out.push_back({d.umin, r}); break;
      default: out.push_back({d.umax, r}); break;
    }
  }
  return out;
}

// interior distinct knot values of a clamped knot vector
std::vector<double> interiorKnots(const GlobalKnotVector& k) {
  std::vector<double> out;
  for (int i = k.degree + 1; i < k.numBasis(); ++i)
    if (out.empty() || k.values[i] != out.back())
      if (k.values[i] > k.domainMin() && k.values[i] < k.domainMax())
        out.push_back(k.values[i]);
  return out;
}

bool singleSignCoefs(const TPSurface& t) {
  return t.coefMin() > 0.0 || t.coefMax() < 0.0;
}

// no closed level curve can live strictly inside a region where one partial
// derivative never vanishes
bool loopExcluded(const TPSurface& t) {
  if (t.uknots.degree > 0 && singleSignCoefs(t.derivativeU())) return true;
  if (t.vknots.degree > 0 && singleSignCoefs(t.derivativeV())) return true;
  return false;
}

template <class F>
bool newtonCritical(F&& f, const Rect& box, double u0, double v0, double& cu, double& cv) {
  double u = u0, v = v0;
  double diag = std::hypot(box.umax - box.umin, box.vmax - box.vmin);
  for (int it = 0; it < 60; ++it) {
    double gu = f(u, v, 1, 0), gv = f(u, v, 0, 1);
    if (std::hypot(gu, gv) < 1e-9) {
      if (u < box.umin || u > box.umax || v < box.vmin || v > box.vmax) return false;
      cu = u;
      cv = v;
      return true;
    }
    double huu = f(u, v, 2, 0), huv = f(u, v, 1, 1), hvv = f(u, v, 0, 2);
    double det = huu * hvv - huv * huv;
    double du, dv;
    if (std::abs(det) < 1e-14) {
      double g2 = gu * gu + gv * gv;
      du = -gu / std::sqrt(g2);  // gradient descent fallback step
      dv = -gv / std::sqrt(g2);
      du *= 0.01 * diag;
      dv *= 0.01 * diag;
    } else {
      du = -(hvv * gu - huv * gv) / det;
      dv = -(-huv * gu + huu * gv) / det;
    }
    double n = std::hypot(du, dv);
    if (n > 0.25 * diag) {
      du *= 0.25 * diag / n;
      dv *= 0.25 * diag / n;
    }
    u += du;
    v += dv;
    if (u < box.umin - diag || u > box.umax + diag || v < box.vmin - diag ||
        v > box.vmax + diag)
      return false;
  }
  return false;
}

struct Tracer {
  const TPSurface& tp;
  double a;
  double tol;
  Rect box;
  double diag;
  std::vector<std::string>* warnings;

  // Newton steps may overshoot the piece; evaluate at the nearest in-domain point
  double f(double u, double v, int du = 0, int dv = 0) const {
    return tp.eval(std::clamp(u, box.umin, box.umax), std::clamp(v, box.vmin, box.vmax), du, dv);
  }

  double elementDiag(double u, double v) const {
    auto span = [&](const GlobalKnotVector& k, double x) {
      const auto& t = k.values;
      auto it = std::upper_bound(t.begin() + k.degree, t.begin() + k.numBasis() + 1, x);
      double hi = it == t.begin() + k.numBasis() + 1 ? k.domainMax() : *it;
      double lo = it == t.begin() + k.degree ? k.domainMin() : *(it - 1);
      return hi - lo;
    };
    return std::hypot(span(tp.uknots, u), span(tp.vknots, v));
  }

  bool inBox(const P& p) const {
    return p.first >= box.umin && p.first <= box.umax && p.second >= box.vmin &&
           p.second <= box.vmax;
  }

  // Newton correction onto F = a along the gradient
  bool correct(P& q) const {
    for (int it = 0; it < 40; ++it) {
      double r = f(q.first, q.second) - a;
      if (std::abs(r) < 0.5 * tol) return true;
      double gu = f(q.first, q.second, 1, 0), gv = f(q.first, q.second, 0, 1);
      double g2 = gu * gu + gv * gv;
      if (g2 < 1e-28) return false;
      q.first -= r * gu / g2;
      q.second -= r * gv / g2;
      if (q.first < box.umin - diag || q.first > box.umax + diag ||
          q.second < box.vmin - diag || q.second > box.vmax + diag)
        return false;
    }
    return false;
  }

  // lands the exit point of segment p->q on the box edge and polishes it there
  P boundaryExit(const P& p, const P& q) const {
    double t = 1.0;
    auto hit = [&](double from, double to, double lo, double hi) {
      if (to < lo && from > lo) t = std::min(t, (lo - from) / (to - from));
      if (to > hi && from < hi) t = std::min(t, (hi - from) / (to - from));
    };
    hit(p.first, q.first, box.umin, box.umax);
    hit(p.second, q.second, box.vmin, box.vmax);
    P e{p.first + t * (q.first - p.first), p.second + t * (q.second - p.second)};
    e.first = std::clamp(e.first, box.umin, box.umax);
    e.second = std::clamp(e.second, box.vmin, box.vmax);
    // 1D Newton along the edge
    bool onU = e.first == box.umin || e.first == box.umax;
    for (int it = 0; it < 40; ++it) {
      double r = f(e.first, e.second) - a;
      if (std::abs(r) < 0.5 * tol) break;
      double g = onU ? f(e.first, e.second, 0, 1) : f(e.first, e.second, 1, 0);
      if (std::abs(g) < 1e-14) break;
      if (onU)
        e.second = std::clamp(e.second - r / g, box.vmin, box.vmax);
      else
        e.first = std::clamp(e.first - r / g, box.umin, box.umax);
    }
    return e;
  }

  // traces from p0 heading along d0; stops at the box boundary or on closure.
  // allowClose is false for traces started on the outer boundary: those must
  // exit again, and the closure test could fire spuriously near the start
  CurveBranch trace(P p0, P d0, bool allowClose = true) const {
    CurveBranch br;
    br.level = a;
    br.pts.push_back(p0);
    P p = p0;
    P dir = d0;
    double hmin = diag * 1e-4;
    for (int step = 0; step < 20000; ++step) {
      double gu = f(p.first, p.second, 1, 0), gv = f(p.first, p.second, 0, 1);
      double g = std::hypot(gu, gv);
      if (g < 1e-14) break;  // dead stop at a critical point
      P t{-gv / g, gu / g};
      if (t.first * dir.first + t.second * dir.second < 0) t = {-t.first, -t.second};
      double m2 = std::max({std::abs(f(p.first, p.second, 2, 0)),
                            std::abs(f(p.first, p.second, 1, 1)),
                            std::abs(f(p.first, p.second, 0, 2)), 1e-12});
      double h = std::clamp(0.5 * g / m2, hmin, 0.5 * elementDiag(p.first, p.second));
      bool advanced = false;
      while (h >= hmin) {
        P q{p.first + h * t.first, p.second + h * t.second};
        if (!inBox(q)) {
          if (h > 4 * hmin) {  // approach the boundary with small steps first
            h *= 0.5;
            continue;
          }
          P e = boundaryExit(p, q);
          if (dist(e, p) > 1e-12 * diag || br.pts.size() == 1) br.pts.push_back(e);
          return br;
        }
        P pred = q;
        if (!correct(q)) {
          h *= 0.5;
          continue;
        }
        // a large correction means the corrector may have landed on a
        // different branch of the level set; retry with a smaller step
        if (dist(q, pred) > 0.25 * h) {
          h *= 0.5;
          continue;
        }
        if (!inBox(q)) {
          P e = boundaryExit(p, q);
          br.pts.push_back(e);
          return br;
        }
        P step2{q.first - p.first, q.second - p.second};
        double sl = std::hypot(step2.first, step2.second);
        if (sl < 1e-15 || (step2.first * t.first + step2.second * t.second) / sl < 0.5) {
          h *= 0.5;
          continue;
        }
        // the tangent at the landing point must agree with the step direction,
        // otherwise the corrector may have landed on a different branch
        double qu = f(q.first, q.second, 1, 0), qv = f(q.first, q.second, 0, 1);
        double qg = std::hypot(qu, qv);
        if (qg > 1e-14 && std::abs(-qv * t.first + qu * t.second) / qg < 0.9) {
          h *= 0.5;
          continue;
        }
        // closure: back near the start, heading toward it
        if (allowClose && br.pts.size() > 3 && dist(q, p0) < h &&
            (p0.first - p.first) * t.first + (p0.second - p.second) * t.second > 0) {
          br.pts.push_back(p0);
          br.closed = true;
          return br;
        }
        p = q;
        dir = t;
        br.pts.push_back(p);
        advanced = true;
        break;
      }
      if (!advanced) {
        if (warnings) {
          std::ostringstream os;
          os << "contour tracing stalled at (" << p.first << "," << p.second
             << ") level " << a;
          warnings->push_back(os.str());
        }
        return br;
      }
    }
    if (warnings) warnings->push_back("contour tracing exceeded the step limit");
    return br;
  }
};

// distance from a point to a polyline; also reports the nearest segment length
std::pair<double, double> distToPolyline(const P& q, const std::vector<P>& poly) {
  double best = std::numeric_limits<double>::infinity(), seg = 0;
  for (size_t i = 0; i + 1 < poly.size(); ++i) {
    double ax = poly[i].first, ay = poly[i].second;
    double bx = poly[i + 1].first, by = poly[i + 1].second;
    double dx = bx - ax, dy = by - ay;
    double l2 = dx * dx + dy * dy;
    double t = l2 > 0 ? std::clamp(((q.first - ax) * dx + (q.second - ay) * dy) / l2, 0.0, 1.0)
                      : 0.0;
    double d = std::hypot(q.first - (ax + t * dx), q.second - (ay + t * dy));
    if (d < best) {
      best = d;
      seg = std::sqrt(l2);
    }
  }
  return {best, seg};
}

bool nearBranch(const P& q, const std::vector<CurveBranch>& branches) {
  for (const auto& br : branches) {
    auto [d, seg] = distToPolyline(q, br.pts);
    if (d < 0.9 * std::max(seg, 1e-300)) return true;
  }
  return false;
}

}  // namespace

std::vector<CurveBranch> contourTP(const TPSurface& tp, double a, double tol,
                                   std::vector<std::string>* warnings) {
  std::vector<CurveBranch> out;
  double lo = tp.coefMin(), hi = tp.coefMax();
  if (a < lo || a > hi || lo == hi) return out;

  Rect box = tpDomain(tp);
  double diag = std::hypot(box.umax - box.umin, box.vmax - box.vmin);
  double ptTol = 1e-6 * diag;
  auto evalC = [&](double u, double v, int du = 0, int dv = 0) {
    return tp.eval(std::clamp(u, box.umin, box.umax), std::clamp(v, box.vmin, box.vmax), du, dv);
  };

  std::vector<P> outer;
  for (int side = 0; side < 4; ++side)
    for (const P& c : edgeCrossings(tp, side, a, tol)) {
      bool dup = false;
      for (const P& o : outer)
        if (dist(c, o) < ptTol) dup = true;
      if (!dup) outer.push_back(c);
    }

  // recursive subdivision: skip regions that cannot hold a closed loop, cut the
  // rest at knots, and keep level crossings of the internal cuts as seeds
  std::vector<P> seeds;
  std::vector<Rect> unresolved;
  auto rec = [&](auto&& self, const TPSurface& t, int depth) -> void {
    if (a < t.coefMin() || a > t.coefMax()) return;
    if (loopExcluded(t)) return;
    auto iu = interiorKnots(t.uknots);
    auto iv = interiorKnots(t.vknots);
    if ((iu.empty() && iv.empty()) || depth >= 30) {
      unresolved.push_back(tpDomain(t));
      if (depth >= 30 && warnings)
        warnings->push_back("contour topology recursion depth cap reached");
      return;
    }
    Rect d = tpDomain(t);
    auto nearest = [](const std::vector<double>& k, double c) {
      double best = k[0];
      for (double v : k)
        if (std::abs(v - c) < std::abs(best - c)) best = v;
      return best;
    };
    std::vector<TPSurface> parts{t};
    if (!iu.empty()) {
      double xu = nearest(iu, 0.5 * (d.umin + d.umax));
      auto [l, r] = t.splitU(xu);
      for (const P& c : edgeCrossings(r, 2, a, tol)) seeds.push_back(c);
      parts = {std::move(l), std::move(r)};
    }
    if (!iv.empty()) {
      double xv = nearest(iv, 0.5 * (d.vmin + d.vmax));
      std::vector<TPSurface> next;
      for (auto& part : parts) {
        auto [b, to] = part.splitV(xv);
        for (const P& c : edgeCrossings(to, 0, a, tol)) seeds.push_back(c);
        next.push_back(std::move(b));
        next.push_back(std::move(to));
      }
      parts = std::move(next);
    }
    for (auto& part : parts) self(self, part, depth + 1);
  };
  rec(rec, tp, 0);

  // unresolved single elements: look for loops around interior critical points
  for (const Rect& r : unresolved) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double u0 = r.umin + (i + 0.5) / 3.0 * (r.umax - r.umin);
        double v0 = r.vmin + (j + 0.5) / 3.0 * (r.vmax - r.vmin);
        double cu, cv;
        if (!newtonCritical(evalC, r, u0, v0, cu, cv)) continue;
        double fc = evalC(cu, cv);
        if (std::abs(fc - a) < tol) continue;
        for (int k = 0; k < 8; ++k) {
          double ang = k * std::numbers::pi / 4.0;
          double du = std::cos(ang), dv = std::sin(ang);
          // march to the element border, bisect any sign change of F - a
          double tmax = std::numeric_limits<double>::infinity();
          if (du > 0) tmax = std::min(tmax, (r.umax - cu) / du);
          if (du < 0) tmax = std::min(tmax, (r.umin - cu) / du);
          if (dv > 0) tmax = std::min(tmax, (r.vmax - cv) / dv);
          if (dv < 0) tmax = std::min(tmax, (r.vmin - cv) / dv);
          if (!std::isfinite(tmax) || tmax <= 0) continue;
          double fEnd = evalC(cu + tmax * du, cv + tmax * dv) - a;
          if ((fc - a) * fEnd >= 0) continue;
          double t0 = 0, t1 = tmax;
          for (int b = 0; b < 80; ++b) {
            double tm = 0.5 * (t0 + t1);
            double fm = evalC(cu + tm * du, cv + tm * dv) - a;
            if ((fc - a) * fm > 0)
              t0 = tm;
            else
              t1 = tm;
          }
          seeds.push_back({cu + 0.5 * (t0 + t1) * du, cv + 0.5 * (t0 + t1) * dv});
          break;
        }
      }
  }

  Tracer tracer{tp, a, tol, box, diag, warnings};

  // open branches from the outer boundary crossings
  std::vector<bool> used(outer.size(), false);
  for (size_t i = 0; i < outer.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    const P& p0 = outer[i];
    // head inward
    P inward{0, 0};
    if (p0.first == box.umin) inward.first = 1;
    if (p0.first == box.umax) inward.first = -1;
    if (p0.second == box.vmin) inward.second = 1;
    if (p0.second == box.vmax) inward.second = -1;
    double gu = evalC(p0.first, p0.second, 1, 0), gv = evalC(p0.first, p0.second, 0, 1);
    P t{-gv, gu};
    if (t.first * inward.first + t.second * inward.second < 0) t = {-t.first, -t.second};
    double n = std::hypot(t.first, t.second);
    if (n < 1e-14) continue;
    CurveBranch br = tracer.trace(p0, {t.first / n, t.second / n}, false);
    if (br.pts.size() < 2) continue;
    if (!br.closed) {
      const P& end = br.pts.back();
      for (size_t j = 0; j < outer.size(); ++j)
        if (!used[j] && dist(end, outer[j]) < 10 * ptTol) {
          used[j] = true;
          br.pts.back() = outer[j];
          break;
        }
    }
    out.push_back(std::move(br));
  }

  // closed loops from the interior seeds
  for (const P& sdRaw : seeds) {
    P sd = sdRaw;
    if (!tracer.correct(sd) || !tracer.inBox(sd)) continue;
    if (nearBranch(sd, out)) continue;
    double gu = evalC(sd.first, sd.second, 1, 0), gv = evalC(sd.first, sd.second, 0, 1);
    double n = std::hypot(gu, gv);
    if (n < 1e-14) continue;
    CurveBranch br = tracer.trace(sd, {-gv / n, gu / n});
    if (!br.closed) {
      // the curve through this seed reaches the boundary: walk the other way too
      CurveBranch back = tracer.trace(sd, {gv / n, -gu / n});
      std::reverse(back.pts.begin(), back.pts.end());
      back.pts.insert(back.pts.end(), br.pts.begin() + 1, br.pts.end());
      br.pts = std::move(back.pts);
    }
    if (br.pts.size() < 2) continue;
    // drop retraces of an already known branch
    bool dup = false;
    size_t m = br.pts.size();
    int hits = 0, samples = 0;
    for (int k = 0; k < 7; ++k) {
      const P& q = br.pts[(m - 1) * k / 6];
      ++samples;
      if (nearBranch(q, out)) ++hits;
    }
    dup = hits >= samples - 1;
    if (!dup) out.push_back(std::move(br));
  }
  return out;
}

std::vector<CurveBranch> mergeBranches(std::vector<CurveBranch> branches, double tol,
                                       std::vector<std::string>* warnings) {
  std::vector<CurveBranch> done;
  std::vector<CurveBranch> open;
  for (auto& b : branches) {
    if (b.closed || b.pts.size() < 2)
      done.push_back(std::move(b));
    else
      open.push_back(std::move(b));
  }

  struct End {
    size_t branch;
    int side;  // 0 front, 1 back
    bool frozen = false;
  };
  auto endPoint = [&](const End& e) {
    return e.side == 0 ? open[e.branch].pts.front() : open[e.branch].pts.back();
  };

  bool changed = true;
  std::vector<bool> frozenFront(open.size(), false), frozenBack(open.size(), false);
  std::vector<bool> dead(open.size(), false);
  while (changed) {
    changed = false;
    std::vector<End> ends;
    for (size_t i = 0; i < open.size(); ++i) {
      if (dead[i]) continue;
      if (open[i].closed) continue;
      if (!frozenFront[i]) ends.push_back({i, 0});
      if (!frozenBack[i]) ends.push_back({i, 1});
    }
    for (size_t i = 0; i < ends.size() && !changed; ++i) {
      std::vector<size_t> cluster{i};
      for (size_t j = i + 1; j < ends.size(); ++j) {
        if (open[ends[i].branch].level != open[ends[j].branch].level) continue;
        if (dist(endPoint(ends[i]), endPoint(ends[j])) < tol) cluster.push_back(j);
      }
      if (cluster.size() == 2) {
        End a = ends[cluster[0]], b = ends[cluster[1]];
        if (a.branch == b.branch) {
          open[a.branch].pts.push_back(open[a.branch].pts.front());
          open[a.branch].closed = true;
        } else {
          auto& pa = open[a.branch].pts;
          auto& pb = open[b.branch].pts;
          if (a.side == 0) std::reverse(pa.begin(), pa.end());
          if (b.side == 1) std::reverse(pb.begin(), pb.end());
          // pa back now meets pb front
          pa.insert(pa.end(), pb.begin() + 1, pb.end());
          if (frozenFront[b.branch] || frozenBack[b.branch])
            frozenBack[a.branch] = true;  // inherited branch-point end
          dead[b.branch] = true;
        }
        changed = true;
      } else if (cluster.size() > 2) {
        double cx = 0, cy = 0;
        for (size_t ci : cluster) {
          cx += endPoint(ends[ci]).first;
          cy += endPoint(ends[ci]).second;
        }
        cx /= cluster.size();
        cy /= cluster.size();
        for (size_t ci : cluster) {
          End e = ends[ci];
          auto& pts = open[e.branch].pts;
          (e.side == 0 ? pts.front() : pts.back()) = {cx, cy};
          (e.side == 0 ? frozenFront[e.branch] : frozenBack[e.branch]) = true;
        }
        changed = true;
      }
    }
  }
  for (size_t i = 0; i < open.size(); ++i)
    if (!dead[i]) done.push_back(std::move(open[i]));
  if (warnings) {
    for (size_t i = 0; i < open.size(); ++i)
      if (!dead[i] && !open[i].closed && (frozenFront[i] || frozenBack[i])) {
        // branch-point ends are expected; nothing to report
      }
  }
  return done;
}

ContourSet contour(const LRSurface& s, const std::vector<double>& levels,
                   double tolerance, bool clipToMask) {
  if (!(tolerance > 0)) throw std::invalid_argument("tolerance must be positive");
  ContourSet out;
  TPPatchSet patches = splitToTP(s, 0);
  for (const auto& w : patches.warnings) out.warnings.push_back(w);
  Rect d = s.domain();
  double diag = std::hypot(d.umax - d.umin, d.vmax - d.vmin);
  for (double level : levels) {
    std::vector<CurveBranch> collected;
    for (const auto& patch : patches.patches)
      for (auto& br : contourTP(patch.surf, level, tolerance, &out.warnings))
        collected.push_back(std::move(br));
    // stitch tolerance on the scale of the minimum trace step: near-tangent
    // boundary exits are value-accurate but can be that far apart in position
    auto merged = mergeBranches(std::move(collected), 5e-5 * diag, &out.warnings);
    for (auto& br : merged) out.branches.push_back(std::move(br));
  }
  if (clipToMask) {
    std::vector<CurveBranch> clipped;
    for (const auto& br : out.branches) {
      CurveBranch cur;
      cur.level = br.level;
      for (const auto& p : br.pts) {
        bool in = s.elements()[s.elementAt(p.first, p.second)].occupied;
        if (in) {
          cur.pts.push_back(p);
        } else if (cur.pts.size() >= 2) {
          clipped.push_back(std::move(cur));
          cur = CurveBranch{br.level, {}, false};
        } else {
          cur.pts.clear();
        }
      }
      if (cur.pts.size() >= 2) {
        cur.closed = br.closed && cur.pts.size() == br.pts.size();
        clipped.push_back(std::move(cur));
      }
    }
    out.branches = std::move(clipped);
  }
  return out;
}

namespace {

bool pointInPolygon(const P& q, const std::vector<P>& poly) {
  bool in = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    double yi = poly[i].second, yj = poly[j].second;
    double xi = poly[i].first, xj = poly[j].first;
    if ((yi > q.second) != (yj > q.second) &&
        q.first < (xj - xi) * (q.second - yi) / (yj - yi) + xi)
      in = !in;
  }
  return in;
}

// a point inside the polygon, found by scanning its bounding box
bool probeInside(const std::vector<P>& poly, P& probe) {
  double x0 = poly[0].first, x1 = x0, y0 = poly[0].second, y1 = y0;
  for (const auto& p : poly) {
    x0 = std::min(x0, p.first);
    x1 = std::max(x1, p.first);
    y0 = std::min(y0, p.second);
    y1 = std::max(y1, p.second);
  }
  for (int k = 1; k <= 16; ++k)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        P q{x0 + (i + 0.5) / k * (x1 - x0), y0 + (j + 0.5) / k * (y1 - y0)};
        if (pointInPolygon(q, poly)) {
          probe = q;
          return true;
        }
      }
  return false;
}

}  // namespace

std::vector<ExtremalPoint> extremalPoints(const LRSurface& s, const ContourSet& contours,
                                          double prominenceFloor) {
  struct Loop {
    const CurveBranch* br;
    bool isMax;
    P probe;
  };
  std::vector<Loop> loops;
  for (const auto& br : contours.branches) {
    if (!br.closed || br.pts.size() < 4) continue;
    P probe;
    if (!probeInside(br.pts, probe)) continue;
    double f = s.evaluate(probe.first, probe.second);
    loops.push_back({&br, f > br.level, probe});
  }
  // trigger loops: no same-kind loop strictly inside
  std::vector<ExtremalPoint> out;
  Rect dom = s.domain();
  double diag = std::hypot(dom.umax - dom.umin, dom.vmax - dom.vmin);
  for (const auto& L : loops) {
    bool innermost = true;
    for (const auto& M : loops) {
      if (&M == &L || M.isMax != L.isMax) continue;
      if (pointInPolygon(M.probe, L.br->pts) && !pointInPolygon(L.probe, M.br->pts))
        innermost = false;
    }
    if (!innermost) continue;

    double x0 = L.br->pts[0].first, x1 = x0, y0 = L.br->pts[0].second, y1 = y0;
    for (const auto& p : L.br->pts) {
      x0 = std::min(x0, p.first);
      x1 = std::max(x1, p.first);
      y0 = std::min(y0, p.second);
      y1 = std::max(y1, p.second);
    }
    Rect box{x0, x1, y0, y1};
    auto evalS = [&](double u, double v, int du, int dv) {
      return s.evaluate(std::clamp(u, dom.umin, dom.umax), std::clamp(v, dom.vmin, dom.vmax),
                        du, dv);
    };
    ExtremalPoint best;
    bool found = false;
    for (int pass = 0; pass < 2 && !found; ++pass) {
      int k = pass == 0 ? 6 : 12;  // denser multi-start fallback
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          P q{x0 + (i + 0.5) / k * (x1 - x0), y0 + (j + 0.5) / k * (y1 - y0)};
          if (!pointInPolygon(q, L.br->pts)) continue;
          double cu, cv;
          if (!newtonCritical(evalS, box, q.first, q.second, cu, cv)) continue;
          if (!pointInPolygon({cu, cv}, L.br->pts)) continue;
          double z = s.evaluate(cu, cv);
          if (L.isMax ? z <= L.br->level : z >= L.br->level) continue;
          if (!found || (L.isMax ? z > best.z : z < best.z)) {
            best = {cu, cv, z, L.isMax, L.br->level,
                    s.elements()[s.elementAt(cu, cv)].occupied};
            found = true;
          }
        }
    }
    if (found) out.push_back(best);
  }

  // deduplicate coincident extrema, keeping the most prominent
  std::vector<ExtremalPoint> dedup;
  for (const auto& e : out) {
    bool merged = false;
    for (auto& d : dedup)
      if (std::hypot(e.x - d.x, e.y - d.y) < 1e-6 * diag && e.isMax == d.isMax) {
        if (std::abs(e.z - e.triggerLevel) > std::abs(d.z - d.triggerLevel)) d = e;
        merged = true;
      }
    if (!merged) dedup.push_back(e);
  }
  std::vector<ExtremalPoint> filtered;
  for (const auto& e : dedup)
    if (std::abs(e.z - e.triggerLevel) >= prominenceFloor) filtered.push_back(e);
  return filtered;
}

Raster slopeRaster(const LRSurface& s, double resolution, bool mask, double nodata) {
  if (!(resolution > 0)) throw std::invalid_argument("resolution must be positive");
  Rect d = s.domain();
  Raster r;
  r.cellsize = resolution;
  r.nodata = nodata;
  r.xll = d.umin;
  r.yll = d.vmin;
  r.ncols = std::max(1, static_cast<int>(std::ceil((d.umax - d.umin) / resolution)));
  r.nrows = std::max(1, static_cast<int>(std::ceil((d.vmax - d.vmin) / resolution)));
  r.values.assign(static_cast<size_t>(r.ncols) * r.nrows, nodata);
  for (int row = 0; row < r.nrows; ++row) {
    double y = r.centerY(row);
    if (y < d.vmin || y > d.vmax) continue;
    for (int col = 0; col < r.ncols; ++col) {
      double x = r.centerX(col);
      if (x < d.umin || x > d.umax) continue;
      if (mask && !s.elements()[s.elementAt(x, y)].occupied) continue;
      double g = std::hypot(s.evaluate(x, y, 1, 0), s.evaluate(x, y, 0, 1));
      r.at(col, row) = std::atan(g) * 180.0 / std::numbers::pi;
    }
  }
  return r;
}

void writeContourCSV(const ContourSet& c, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "level,curve_id,closed,seq,x,y\n";
  for (size_t id = 0; id < c.branches.size(); ++id) {
    const auto& br = c.branches[id];
    for (size_t k = 0; k < br.pts.size(); ++k)
      f << fmt(br.level) << "," << id << "," << (br.closed ? 1 : 0) << "," << k << ","
        << fmt(br.pts[k].first) << "," << fmt(br.pts[k].second) << "\n";
  }
}

void writeExtremaCSV(const std::vector<ExtremalPoint>& e, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "kind,x,y,z,trigger_level\n";
  for (const auto& p : e)
    f << (p.isMax ? "max" : "min") << "," << fmt(p.x) << "," << fmt(p.y) << ","
      << fmt(p.z) << "," << fmt(p.triggerLevel) << "\n";
}

}  // namespace lrfit
