#include "lrfit/fitting.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace lrfit {

double ThresholdSpec::eval(double z) const {
  if (breakpoints.empty()) throw std::invalid_argument("empty threshold spec");
  if (z <= breakpoints.front().first) return breakpoints.front().second;
  if (z >= breakpoints.back().first) return breakpoints.back().second;
  for (size_t i = 1; i < breakpoints.size(); ++i) {
    if (z <= breakpoints[i].first) {
      auto [z0, e0] = breakpoints[i - 1];
      auto [z1, e1] = breakpoints[i];
      double t = (z - z0) / (z1 - z0);
      return e0 + t * (e1 - e0);
    }
  }
  return breakpoints.back().second;
}

namespace {

// Gauss-Legendre nodes/weights on [-1,1], Newton iteration on P_n
void gaussLegendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

double pointEps(const DataPoint& p, const FitConfig& cfg) {
  if (p.tol > 0) return p.tol;
  if (p.significant) return cfg.significantTol;
  return cfg.threshold.eval(p.z);
}

double pointWeight(const DataPoint& p, const FitConfig& cfg, double sigOverride) {
  double w = p.weight;
  if (p.significant) w *= (sigOverride > 0 ? sigOverride : cfg.significantWeight);
  return w;
}

bool inDomain(const Rect& d, const DataPoint& p) {
  return p.x >= d.umin && p.x <= d.umax && p.y >= d.vmin && p.y <= d.vmax;
}

// compact index of every alive B-spline id
std::unordered_map<int, int> slotMap(const std::vector<int>& ids) {
  std::unordered_map<int, int> m;
  m.reserve(ids.size() * 2);
  for (size_t k = 0; k < ids.size(); ++k) m[ids[k]] = static_cast<int>(k);
  return m;
}

std::vector<std::vector<int>> groupByElement(const LRSurface& s,
                                             const PointCloud& cloud) {
  std::vector<std::vector<int>> out(s.elements().size());
  Rect d = s.domain();
  for (size_t i = 0; i < cloud.pts.size(); ++i) {
    const auto& p = cloud.pts[i];
    if (!inDomain(d, p)) continue;
    out[s.elementAt(p.x, p.y)].push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

LRSurface initialFit(const PointCloud& cloud, const FitConfig& cfg) {
  auto bb = cloud.bbox();
  double xmin = bb.xmin, xmax = bb.xmax, ymin = bb.ymin, ymax = bb.ymax;
  if (xmax - xmin <= 0) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin <= 0) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  int n1 = std::max(cfg.degreeU + 1, cfg.initialGridU);
  int n2 = std::max(cfg.degreeV + 1, cfg.initialGridV);
  auto ku = GlobalKnotVector::uniformClamped(xmin, xmax, n1, cfg.degreeU);
  auto kv = GlobalKnotVector::uniformClamped(ymin, ymax, n2, cfg.degreeV);
  TPSurface tp(ku, kv, std::vector<double>(static_cast<size_t>(n1) * n2, 0.0));
  LRSurface s = LRSurface::fromTensorProduct(tp);
  leastSquaresFit(s, cloud, cfg);
  return s;
}

AccuracyResult computeAccuracy(LRSurface& surface, const PointCloud& cloud,
                               const FitConfig& cfg) {
  AccuracyResult res;
  auto& rep = res.report;
  rep.perElement.assign(surface.elements().size(), {});
  res.residuals.assign(cloud.pts.size(), std::numeric_limits<double>::quiet_NaN());
  surface.clearOccupancy();
  Rect d = surface.domain();
  double sum = 0;
  for (size_t i = 0; i < cloud.pts.size(); ++i) {
    const auto& p = cloud.pts[i];
    if (!inDomain(d, p)) {
      ++rep.outsideDomain;
      continue;
    }
    int e = surface.elementAt(p.x, p.y);
    surface.markOccupied(e, true);
    double r = p.z - surface.evaluate(p.x, p.y);
    res.residuals[i] = r;
    double a = std::abs(r);
    ++rep.total;
    sum += a;
    rep.maxDist = std::max(rep.maxDist, a);
    if (a < 0.2)
      ++rep.band0;
    else if (a < 0.5)
      ++rep.band1;
    else
      ++rep.band2;
    auto& er = rep.perElement[e];
    ++er.points;
    er.maxDist = std::max(er.maxDist, a);
    if (a > pointEps(p, cfg)) {
      ++er.outOfTol;
      ++rep.outOfTol;
    }
  }
  rep.avgDist = rep.total ? sum / rep.total : 0.0;
  return res;
}

std::vector<Meshline> selectRefinements(const LRSurface& surface,
                                        const AccuracyReport& acc,
                                        const FitConfig& cfg) {
  if (acc.perElement.size() != surface.elements().size())
    throw std::invalid_argument("accuracy report does not match surface");

  // resulting element sizes if a line at (dir,fixed) crossing `box` is added
  auto sizeOk = [&](LineDir dir, double fixed, const Rect& box) {
    if (dir == LineDir::ConstU) {
      if (cfg.minElemU <= 0) return true;
      return fixed - box.umin >= cfg.minElemU && box.umax - fixed >= cfg.minElemU;
    }
    if (cfg.minElemV <= 0) return true;
    return fixed - box.vmin >= cfg.minElemV && box.vmax - fixed >= cfg.minElemV;
  };
  // check all elements the span would cross, not just the seed element
  auto crossOk = [&](LineDir dir, double fixed, double s, double e) {
    if ((dir == LineDir::ConstU ? cfg.minElemU : cfg.minElemV) <= 0) return true;
    for (const auto& el : surface.elements()) {
      const Rect& b = el.box;
      bool crosses = dir == LineDir::ConstU
                         ? (b.umin < fixed && fixed < b.umax && s <= b.vmin && b.vmax <= e)
                         : (b.vmin < fixed && fixed < b.vmax && s <= b.umin && b.umax <= e);
      if (crosses && !sizeOk(dir, fixed, b)) return false;
    }
    return true;
  };
  auto spanFor = [&](const Element& el, LineDir dir, double& s, double& e) {
    double best = std::numeric_limits<double>::infinity();
    for (int id : el.bsplines) {
      Rect sup = surface.supportOf(id);
      double lo = dir == LineDir::ConstU ? sup.vmin : sup.umin;
      double hi = dir == LineDir::ConstU ? sup.vmax : sup.umax;
      if (hi - lo < best) {
        best = hi - lo;
        s = lo;
        e = hi;
      }
    }
    return std::isfinite(best);
  };

  // (dir,fixed) -> candidate intervals, merged before emitting
  std::map<std::pair<int, double>, std::vector<std::pair<double, double>>> cand;
  for (size_t ei = 0; ei < acc.perElement.size(); ++ei) {
    if (acc.perElement[ei].outOfTol == 0) continue;
    const Element& el = surface.elements()[ei];
    double du = el.box.umax - el.box.umin;
    double dv = el.box.vmax - el.box.vmin;
    LineDir prefer = du >= dv ? LineDir::ConstU : LineDir::ConstV;
    for (LineDir dir : {prefer, prefer == LineDir::ConstU ? LineDir::ConstV
                                                          : LineDir::ConstU}) {
      double fixed = dir == LineDir::ConstU ? 0.5 * (el.box.umin + el.box.umax)
                                            : 0.5 * (el.box.vmin + el.box.vmax);
      double s = 0, e = 0;
      if (!sizeOk(dir, fixed, el.box)) continue;
      if (!spanFor(el, dir, s, e)) continue;
      if (!crossOk(dir, fixed, s, e)) continue;
      cand[{static_cast<int>(dir), fixed}].emplace_back(s, e);
      break;
    }
  }

  std::vector<Meshline> out;
  for (auto& [key, ivs] : cand) {
    std::sort(ivs.begin(), ivs.end());
    double s = ivs[0].first, e = ivs[0].second;
    for (size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i].first <= e) {
        e = std::max(e, ivs[i].second);
      } else {
        out.push_back({static_cast<LineDir>(key.first), key.second, s, e, 1});
        s = ivs[i].first;
        e = ivs[i].second;
      }
    }
    out.push_back({static_cast<LineDir>(key.first), key.second, s, e, 1});
  }
  return out;
}

namespace {

struct Derivs2 {
  double d20, d11, d02;
};
struct Derivs3 {
  double d30, d21, d12, d03;
};

}  // namespace

void leastSquaresFit(LRSurface& surface, const PointCloud& cloud,
                     const FitConfig& cfg, double sigWeight) {
  auto ids = surface.bsplineIds();
  int n = static_cast<int>(ids.size());
  auto slot = slotMap(ids);
  auto elemPts = groupByElement(surface, cloud);

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

  int qn = std::max(surface.degreeU(), surface.degreeV()) + 1;
  std::vector<double> gx, gw;
  gaussLegendre(qn, gx, gw);

  double a1 = cfg.alpha1;
  double a2 = 1.0 - cfg.alpha1;
  double c2 = cfg.w2 * std::numbers::pi / 8.0;
  double c3 = cfg.w3 * std::numbers::pi / 16.0;

  const auto& elems = surface.elements();
  std::vector<double> loc;  // local dense matrix
  std::vector<double> lrhs;
  for (size_t ei = 0; ei < elems.size(); ++ei) {
    const Element& el = elems[ei];
    int nl = static_cast<int>(el.bsplines.size());
    if (nl == 0) continue;
    loc.assign(static_cast<size_t>(nl) * nl, 0.0);
    lrhs.assign(nl, 0.0);

    // smoothness energy over the element
    if (a1 > 0) {
      double hx = 0.5 * (el.box.umax - el.box.umin);
      double hy = 0.5 * (el.box.vmax - el.box.vmin);
      double cx = 0.5 * (el.box.umax + el.box.umin);
      double cy = 0.5 * (el.box.vmax + el.box.vmin);
      std::vector<Derivs2> d2(nl);
      std::vector<Derivs3> d3(nl);
      for (int qi = 0; qi < qn; ++qi) {
        double u = cx + hx * gx[qi];
        for (int qj = 0; qj < qn; ++qj) {
          double v = cy + hy * gx[qj];
          double jac = hx * hy * gw[qi] * gw[qj];
          for (int k = 0; k < nl; ++k) {
            int id = el.bsplines[k];
            d2[k] = {surface.evalBasis(id, u, v, 2, 0), surface.evalBasis(id, u, v, 1, 1),
                     surface.evalBasis(id, u, v, 0, 2)};
            d3[k] = {surface.evalBasis(id, u, v, 3, 0), surface.evalBasis(id, u, v, 2, 1),
                     surface.evalBasis(id, u, v, 1, 2), surface.evalBasis(id, u, v, 0, 3)};
          }
          for (int i = 0; i < nl; ++i) {
            for (int j = 0; j < nl; ++j) {
              double s2 = 3 * d2[i].d20 * d2[j].d20 + 3 * d2[i].d02 * d2[j].d02 +
                          (d2[i].d20 * d2[j].d02 + d2[i].d02 * d2[j].d20) +
                          4 * d2[i].d11 * d2[j].d11;
              double s3 = 5 * d3[i].d30 * d3[j].d30 + 9 * d3[i].d21 * d3[j].d21 +
                          9 * d3[i].d12 * d3[j].d12 + 5 * d3[i].d03 * d3[j].d03 +
                          3 * (d3[i].d30 * d3[j].d12 + d3[i].d12 * d3[j].d30) +
                          3 * (d3[i].d21 * d3[j].d03 + d3[i].d03 * d3[j].d21);
              loc[i * nl + j] += a1 * jac * (c2 * s2 + c3 * s3);
            }
          }
        }
      }
    }

    // data misfit
    std::vector<double> bv(nl);
    for (int pi : elemPts[ei]) {
      const auto& p = cloud.pts[pi];
      double w = a2 * pointWeight(p, cfg, sigWeight);
      for (int k = 0; k < nl; ++k) bv[k] = surface.evalBasis(el.bsplines[k], p.x, p.y);
      for (int i = 0; i < nl; ++i) {
        double wi = w * bv[i];
        lrhs[i] += wi * p.z;
        for (int j = 0; j < nl; ++j) loc[i * nl + j] += wi * bv[j];
      }
    }

    for (int i = 0; i < nl; ++i) {
      int gi = slot.at(el.bsplines[i]);
      rhs[gi] += lrhs[i];
      for (int j = 0; j < nl; ++j) {
        double v = loc[i * nl + j];
        if (v != 0.0) trips.emplace_back(gi, slot.at(el.bsplines[j]), v);
      }
    }
  }

  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(1e-10);
  cg.setMaxIterations(10 * static_cast<Eigen::Index>(n));
  cg.compute(A);
  Eigen::VectorXd x0(n);
  for (int k = 0; k < n; ++k) x0[k] = surface.coef(ids[k]);
  Eigen::VectorXd x = cg.solveWithGuess(rhs, x0);
  if (cg.info() != Eigen::Success) {
    std::ostringstream os;
    os << "least squares solve did not converge: " << cg.iterations()
       << " iterations, residual " << cg.error();
    throw std::runtime_error(os.str());
  }
  for (int k = 0; k < n; ++k) surface.setCoef(ids[k], x[k]);
}

void mbaUpdate(LRSurface& surface, const PointCloud& cloud, const FitConfig& cfg,
               double sigWeight) {
  auto ids = surface.bsplineIds();
  auto slot = slotMap(ids);
  std::vector<double> num(ids.size(), 0.0), den(ids.size(), 0.0);
  Rect d = surface.domain();
  std::vector<std::pair<int, double>> bv;
  for (const auto& p : cloud.pts) {
    if (!inDomain(d, p)) continue;
    bv = surface.basisAt(p.x, p.y);
    double r = p.z;
    double dp = 0;
    for (const auto& [id, v] : bv) {
      r -= surface.coef(id) * v;
      dp += v * v;
    }
    if (dp <= 0) continue;
    double w = pointWeight(p, cfg, sigWeight);
    for (const auto& [id, v] : bv) {
      int k = slot.at(id);
      num[k] += w * v * v * v * r / dp;
      den[k] += w * v * v;
    }
  }
  for (size_t k = 0; k < ids.size(); ++k)
    if (den[k] > 0) surface.setCoef(ids[k], surface.coef(ids[k]) + num[k] / den[k]);
}

AdaptiveFitResult adaptiveFit(const PointCloud& cloud, const FitConfig& cfg) {
  AdaptiveFitResult out;
  out.surface = initialFit(cloud, cfg);
  auto acc = computeAccuracy(out.surface, cloud, cfg);

  auto record = [&](int iter) {
    out.history.push_back({iter, out.surface.numBSplines(), acc.report.maxDist,
                           acc.report.avgDist, acc.report.outOfTol, acc.report.band0,
                           acc.report.band1, acc.report.band2});
  };
  record(0);

  for (int iter = 1; iter <= cfg.maxIterations && acc.report.outOfTol > 0; ++iter) {
    auto lines = selectRefinements(out.surface, acc.report, cfg);
    int inserted = 0;
    for (const auto& m : lines) {
      try {
        out.surface.insertMeshline(m);
        ++inserted;
      } catch (const std::invalid_argument&) {
        // a previous insertion already refined everything this line would split
      }
    }
    if (inserted == 0) break;
    if (iter <= cfg.lsIterations) {
      leastSquaresFit(out.surface, cloud, cfg);
    } else {
      for (int p = 0; p < cfg.mbaPasses; ++p) mbaUpdate(out.surface, cloud, cfg);
    }
    acc = computeAccuracy(out.surface, cloud, cfg);
    record(iter);
  }

  // significant points get a last chance with a much larger weight
  bool sigOut = false;
  Rect d = out.surface.domain();
  for (size_t i = 0; i < cloud.pts.size(); ++i) {
    const auto& p = cloud.pts[i];
    if (p.significant && inDomain(d, p) &&
        std::abs(acc.residuals[i]) > pointEps(p, cfg)) {
      sigOut = true;
      break;
    }
  }
  if (sigOut) {
    mbaUpdate(out.surface, cloud, cfg, cfg.significantFinalWeight);
    acc = computeAccuracy(out.surface, cloud, cfg);
    record(static_cast<int>(out.history.size()));
  }

  out.accuracy = acc.report;
  return out;
}

std::pair<LRSurface, LRSurface> limitSurfaces(const LRSurface& source,
                                              const PointCloud& cloud) {
  Rect d = source.domain();
  std::vector<std::pair<int, double>> resid;  // point index, z - F
  for (size_t i = 0; i < cloud.pts.size(); ++i) {
    const auto& p = cloud.pts[i];
    if (!inDomain(d, p)) continue;
    resid.emplace_back(static_cast<int>(i), p.z - source.evaluate(p.x, p.y));
  }

  FitConfig cfg;  // only weights matter here and all points are plain
  auto fitResidual = [&](bool above) {
    LRSurface s = source;
    for (int id : s.bsplineIds()) s.setCoef(id, 0.0);
    PointCloud sub;
    for (const auto& [i, r] : resid) {
      if (above ? r > 0 : r < 0)
        sub.pts.push_back({cloud.pts[i].x, cloud.pts[i].y, r, 1.0, false, 0.0});
    }
    for (int pass = 0; pass < 5; ++pass) mbaUpdate(s, sub, cfg);
    return s;
  };

  LRSurface resUp = fitResidual(true);
  LRSurface resLow = fitResidual(false);

  // shift each coefficient so the residual surface bounds every residual
  auto ids = resUp.bsplineIds();
  auto slot = slotMap(ids);
  std::vector<double> up(ids.size(), 0.0), low(ids.size(), 0.0);
  for (const auto& [i, r] : resid) {
    const auto& p = cloud.pts[i];
    double eu = r - resUp.evaluate(p.x, p.y);
    double el = r - resLow.evaluate(p.x, p.y);
    int e = resUp.elementAt(p.x, p.y);
    for (int id : resUp.elements()[e].bsplines) {
      int k = slot.at(id);
      up[k] = std::max(up[k], eu);
      low[k] = std::min(low[k], el);
    }
  }

  LRSurface upper = source, lower = source;
  for (size_t k = 0; k < ids.size(); ++k) {
    int id = ids[k];
    upper.setCoef(id, source.coef(id) + resUp.coef(id) + up[k]);
    lower.setCoef(id, source.coef(id) + resLow.coef(id) + low[k]);
  }
  return {upper, lower};
}

LRSurface weightedMidSurface(const LRSurface& source, const LRSurface& upper,
                             double d1, double d2) {
  if (d1 >= d2) throw std::invalid_argument("d1 must be smaller than d2");
  if (source.degreeU() != upper.degreeU() || source.degreeV() != upper.degreeV() ||
      source.knotsU() != upper.knotsU() || source.knotsV() != upper.knotsV())
    throw std::invalid_argument("surfaces are not on the same spline space");
  auto ids = source.bsplineIds();
  if (ids != upper.bsplineIds())
    throw std::invalid_argument("surfaces are not on the same spline space");

  LRSurface out = source;
  for (int id : ids) {
    auto [gu, gv] = source.grevillePoint(id);
    double mid = 0.5 * (source.evaluate(gu, gv) + upper.evaluate(gu, gv));
    double a;
    if (mid <= d1)
      a = 1.0;
    else if (mid >= d2)
      a = 0.0;
    else
      a = (d2 - mid) / (d2 - d1);
    out.setCoef(id, a * source.coef(id) + (1.0 - a) * upper.coef(id));
  }
  return out;
}

double rmse(const PointCloud& cloud, const LRSurface& surface) {
  Rect d = surface.domain();
  double sum = 0;
  long long n = 0;
  for (const auto& p : cloud.pts) {
    if (!inDomain(d, p)) continue;
    double r = p.z - surface.evaluate(p.x, p.y);
    sum += r * r;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no points inside surface domain");
  return std::sqrt(sum / n);
}

FitConfig FitConfig::preset(const std::string& name) {
  FitConfig c;
  auto variable = [] {
    return ThresholdSpec{{{-27.94, 0.31176}, {-0.55, 0.20022}}};
  };
  if (name == "F7") {
  } else if (name == "V7") {
    c.threshold = variable();
  } else if (name == "V9") {
    c.threshold = variable();
    c.maxIterations = 9;
  } else if (name == "V9E1") {
    c.threshold = variable();
    c.maxIterations = 9;
    c.minElemU = c.minElemV = 1.0;
  } else if (name == "V9E2") {
    c.threshold = variable();
    c.maxIterations = 9;
    c.minElemU = c.minElemV = 2.0;
  } else if (name == "WM7") {
    c.weightedMid = true;
  } else if (name == "FS7") {
  } else if (name == "FS9") {
    c.maxIterations = 9;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return c;
}

void FitConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "degree_u=" << degreeU << "\ndegree_v=" << degreeV
    << "\nmax_iterations=" << maxIterations << "\n";
  if (threshold.breakpoints.size() == 1) {
    f << "threshold=" << threshold.breakpoints[0].second << "\n";
  } else {
    f << "threshold_map=";
    for (size_t i = 0; i < threshold.breakpoints.size(); ++i) {
      if (i) f << ",";
      f << threshold.breakpoints[i].first << ":" << threshold.breakpoints[i].second;
    }
    f << "\n";
  }
  f << "initial_grid_u=" << initialGridU << "\ninitial_grid_v=" << initialGridV
    << "\nalpha1=" << alpha1 << "\nw2=" << w2 << "\nw3=" << w3
    << "\nls_iterations=" << lsIterations << "\nmba_passes=" << mbaPasses
    << "\nmin_element_u=" << minElemU << "\nmin_element_v=" << minElemV
    << "\nsignificant_weight=" << significantWeight
    << "\nsignificant_final_weight=" << significantFinalWeight
    << "\nsignificant_tol=" << significantTol
    << "\nweighted_mid=" << (weightedMid ? 1 : 0) << "\nmid_d1=" << midD1
    << "\nmid_d2=" << midD2 << "\n";
}

FitConfig FitConfig::fromFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  FitConfig c;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    auto h = line.find('#');
    if (h != std::string::npos) line.erase(h);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.pop_back();
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(ln) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto num = [&] { return std::stod(val); };
    if (key == "degree_u")
      c.degreeU = std::stoi(val);
    else if (key == "degree_v")
      c.degreeV = std::stoi(val);
    else if (key == "max_iterations")
      c.maxIterations = std::stoi(val);
    else if (key == "threshold")
      c.threshold = ThresholdSpec::constant(num());
    else if (key == "threshold_map") {
      ThresholdSpec t;
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) {
        auto col = item.find(':');
        if (col == std::string::npos)
          throw std::invalid_argument(path + ": bad threshold_map entry: " + item);
        t.breakpoints.emplace_back(std::stod(item.substr(0, col)),
                                   std::stod(item.substr(col + 1)));
      }
      if (t.breakpoints.empty())
        throw std::invalid_argument(path + ": empty threshold_map");
      std::sort(t.breakpoints.begin(), t.breakpoints.end());
      c.threshold = t;
    } else if (key == "initial_grid_u")
      c.initialGridU = std::stoi(val);
    else if (key == "initial_grid_v")
      c.initialGridV = std::stoi(val);
    else if (key == "alpha1")
      c.alpha1 = num();
    else if (key == "w2")
      c.w2 = num();
    else if (key == "w3")
      c.w3 = num();
    else if (key == "ls_iterations")
      c.lsIterations = std::stoi(val);
    else if (key == "mba_passes")
      c.mbaPasses = std::stoi(val);
    else if (key == "min_element_u")
      c.minElemU = num();
    else if (key == "min_element_v")
      c.minElemV = num();
    else if (key == "significant_weight")
      c.significantWeight = num();
    else if (key == "significant_final_weight")
      c.significantFinalWeight = num();
    else if (key == "significant_tol")
      c.significantTol = num();
    else if (key == "weighted_mid")
      c.weightedMid = std::stoi(val) != 0;
    else if (key == "mid_d1")
      c.midD1 = num();
    else if (key == "mid_d2")
      c.midD2 = num();
    else
      throw std::invalid_argument(path + ": unknown key: " + key);
  }
  return c;
}

}  // namespace lrfit
