#include "lrfit/io.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace lrfit {

namespace {

std::string fmt(double x) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

[[noreturn]] void parseError(const std::string& path, int line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

PointCloud readXYZ(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  PointCloud cloud;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    auto h = line.find('#');
    if (h != std::string::npos) line.erase(h);
    std::istringstream ss(line);
    DataPoint p;
    if (!(ss >> p.x)) {
      std::string rest;
      if (ss.clear(), ss >> rest) parseError(path, ln, "malformed point line");
      continue;  // blank
    }
    if (!(ss >> p.y >> p.z)) parseError(path, ln, "malformed point line");
    std::string rest;
    if (ss >> rest) parseError(path, ln, "trailing characters");
    cloud.pts.push_back(p);
  }
  return cloud;
}

void writeXYZ(const PointCloud& cloud, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& p : cloud.pts)
    f << fmt(p.x) << " " << fmt(p.y) << " " << fmt(p.z) << "\n";
}

void writeLRSurf(const LRSurface& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "LRSURF 1\n" << s.degreeU() << " " << s.degreeV() << " 1\n";
  f << s.knotsU().size();
  for (double v : s.knotsU()) f << " " << fmt(v);
  f << "\n" << s.knotsV().size();
  for (double v : s.knotsV()) f << " " << fmt(v);
  f << "\n";
  auto bs = s.bsplineData();
  f << bs.size() << "\n";
  for (const auto& b : bs) {
    for (int i : b.uidx) f << i << " ";
    for (int i : b.vidx) f << i << " ";
    f << fmt(b.scale) << " " << fmt(b.coef) << "\n";
  }
}

LRSurface readLRSurf(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string magic;
  int version = 0;
  f >> magic >> version;
  if (magic != "LRSURF" || version != 1)
    throw std::runtime_error(path + ": not an LRSURF version 1 file");
  int p1, p2, dim;
  if (!(f >> p1 >> p2 >> dim)) throw std::runtime_error(path + ": bad header");
  if (p1 < 0 || p2 < 0) throw std::runtime_error(path + ": negative degree");
  if (dim != 1) throw std::runtime_error(path + ": only dimension 1 supported");
  auto readKnots = [&](std::vector<double>& k) {
    size_t n;
    if (!(f >> n)) throw std::runtime_error(path + ": bad knot count");
    k.resize(n);
    for (auto& v : k)
      if (!(f >> v)) throw std::runtime_error(path + ": bad knot value");
  };
  std::vector<double> ku, kv;
  readKnots(ku);
  readKnots(kv);
  size_t nb;
  if (!(f >> nb)) throw std::runtime_error(path + ": bad B-spline count");
  std::vector<LRSurface::BSplineData> bs(nb);
  for (auto& b : bs) {
    b.uidx.resize(p1 + 2);
    b.vidx.resize(p2 + 2);
    for (auto& i : b.uidx)
      if (!(f >> i)) throw std::runtime_error(path + ": bad u index");
    for (auto& i : b.vidx)
      if (!(f >> i)) throw std::runtime_error(path + ": bad v index");
    if (!(f >> b.scale >> b.coef)) throw std::runtime_error(path + ": bad B-spline line");
  }
  try {
    return LRSurface::fromData(p1, p2, std::move(ku), std::move(kv), std::move(bs));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void writeASC(const Raster& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "ncols " << r.ncols << "\nnrows " << r.nrows << "\nxllcorner " << fmt(r.xll)
    << "\nyllcorner " << fmt(r.yll) << "\ncellsize " << fmt(r.cellsize)
    << "\nNODATA_value " << fmt(r.nodata) << "\n";
  for (int row = 0; row < r.nrows; ++row) {
    for (int col = 0; col < r.ncols; ++col) {
      if (col) f << " ";
      f << fmt(r.at(col, row));
    }
    f << "\n";
  }
}

Raster readASC(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  Raster r;
  auto header = [&](const char* want, auto& out) {
    std::string key;
    if (!(f >> key >> out) || key != want)
      throw std::runtime_error(path + ": expected header line '" + want + "'");
  };
  header("ncols", r.ncols);
  header("nrows", r.nrows);
  header("xllcorner", r.xll);
  header("yllcorner", r.yll);
  header("cellsize", r.cellsize);
  header("NODATA_value", r.nodata);
  if (r.ncols < 1 || r.nrows < 1 || !(r.cellsize > 0))
    throw std::runtime_error(path + ": invalid raster header");
  r.values.resize(static_cast<size_t>(r.ncols) * r.nrows);
  for (auto& v : r.values)
    if (!(f >> v)) throw std::runtime_error(path + ": truncated value grid");
  return r;
}

Raster rasterFromSurface(const LRSurface& s, double cellsize, bool mask,
                         double nodata) {
  if (!(cellsize > 0)) throw std::invalid_argument("cellsize must be positive");
  Rect d = s.domain();
  Raster r;
  r.cellsize = cellsize;
  r.nodata = nodata;
  r.xll = d.umin;
  r.yll = d.vmin;
  r.ncols = std::max(1, static_cast<int>(std::ceil((d.umax - d.umin) / cellsize)));
  r.nrows = std::max(1, static_cast<int>(std::ceil((d.vmax - d.vmin) / cellsize)));
  r.values.assign(static_cast<size_t>(r.ncols) * r.nrows, nodata);
  for (int row = 0; row < r.nrows; ++row) {
    double y = r.centerY(row);
    if (y < d.vmin || y > d.vmax) continue;
    for (int col = 0; col < r.ncols; ++col) {
      double x = r.centerX(col);
      if (x < d.umin || x > d.umax) continue;
      if (mask && !s.elements()[s.elementAt(x, y)].occupied) continue;
      r.at(col, row) = s.evaluate(x, y);
    }
  }
  return r;
}

Raster idwRaster(const PointCloud& cloud, double cellsize, double R, double nodata) {
  if (!(cellsize > 0)) throw std::invalid_argument("cellsize must be positive");
  if (!(R > 0)) throw std::invalid_argument("radius must be positive");
  auto bb = cloud.bbox();
  Raster r;
  r.cellsize = cellsize;
  r.nodata = nodata;
  r.xll = bb.xmin;
  r.yll = bb.ymin;
  r.ncols = std::max(1, static_cast<int>(std::ceil((bb.xmax - bb.xmin) / cellsize)));
  r.nrows = std::max(1, static_cast<int>(std::ceil((bb.ymax - bb.ymin) / cellsize)));
  r.values.assign(static_cast<size_t>(r.ncols) * r.nrows, nodata);

  // bin points on an R-sized grid so each cell only scans 3x3 bins
  int bx = std::max(1, static_cast<int>(std::ceil((bb.xmax - bb.xmin) / R)));
  int by = std::max(1, static_cast<int>(std::ceil((bb.ymax - bb.ymin) / R)));
  std::vector<std::vector<int>> bins(static_cast<size_t>(bx) * by);
  auto binOf = [&](double x, double y) {
    int i = std::clamp(static_cast<int>((x - bb.xmin) / R), 0, bx - 1);
    int j = std::clamp(static_cast<int>((y - bb.ymin) / R), 0, by - 1);
    return i + j * bx;
  };
  for (size_t i = 0; i < cloud.pts.size(); ++i)
    bins[binOf(cloud.pts[i].x, cloud.pts[i].y)].push_back(static_cast<int>(i));

  for (int row = 0; row < r.nrows; ++row) {
    double y = r.centerY(row);
    for (int col = 0; col < r.ncols; ++col) {
      double x = r.centerX(col);
      int bi = std::clamp(static_cast<int>((x - bb.xmin) / R), 0, bx - 1);
      int bj = std::clamp(static_cast<int>((y - bb.ymin) / R), 0, by - 1);
      double num = 0, den = 0;
      bool hit = false, coincident = false;
      double coZ = 0;
      for (int j = std::max(0, bj - 1); j <= std::min(by - 1, bj + 1) && !coincident; ++j)
        for (int i = std::max(0, bi - 1); i <= std::min(bx - 1, bi + 1); ++i)
          for (int pi : bins[i + j * bx]) {
            const auto& p = cloud.pts[pi];
            double dist = std::hypot(x - p.x, y - p.y);
            if (dist < 1e-12) {
              coincident = true;
              coZ = p.z;
              break;
            }
            if (dist >= R) continue;
            double w = (R - dist) / (R * dist);
            w *= w;
            num += w * p.z;
            den += w;
            hit = true;
          }
      if (coincident)
        r.at(col, row) = coZ;
      else if (hit)
        r.at(col, row) = num / den;
    }
  }
  return r;
}

double rasterBilinearEval(const Raster& r, double x, double y) {
  double fx = (x - r.xll) / r.cellsize - 0.5;
  double fy = (r.yll + r.nrows * r.cellsize - y) / r.cellsize - 0.5;  // from top
  if (x < r.xll || x > r.xll + r.ncols * r.cellsize || y < r.yll ||
      y > r.yll + r.nrows * r.cellsize)
    throw std::domain_error("query outside raster extent");
  int c0 = std::clamp(static_cast<int>(std::floor(fx)), 0, std::max(0, r.ncols - 2));
  int r0 = std::clamp(static_cast<int>(std::floor(fy)), 0, std::max(0, r.nrows - 2));
  int c1 = std::min(c0 + 1, r.ncols - 1);
  int r1 = std::min(r0 + 1, r.nrows - 1);
  double tx = std::clamp(fx - c0, 0.0, 1.0);
  double ty = std::clamp(fy - r0, 0.0, 1.0);
  double v00 = r.at(c0, r0), v10 = r.at(c1, r0), v01 = r.at(c0, r1), v11 = r.at(c1, r1);
  if (v00 == r.nodata || v10 == r.nodata || v01 == r.nodata || v11 == r.nodata)
    return r.nodata;
  return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

namespace {

struct Seg {
  double s, e;
  int m;
};
using LineMap = std::map<double, std::vector<Seg>>;

// does the merged coverage contain [lo,hi] entirely?
bool covers(const std::vector<Seg>& cov, double lo, double hi) {
  double reach = lo;
  for (const auto& g : cov) {  // sorted by construction
    if (g.s > reach) return false;
    reach = std::max(reach, g.e);
    if (reach >= hi) return true;
  }
  return reach >= hi;
}

std::vector<Seg> clip(const std::vector<Seg>& segs, double lo, double hi) {
  std::vector<Seg> out;
  for (const auto& g : segs) {
    double s = std::max(g.s, lo), e = std::min(g.e, hi);
    if (s < e) out.push_back({s, e, g.m});
  }
  return out;
}

}  // namespace

TPPatchSet splitToTP(const LRSurface& s, int maxSegmented) {
  if (maxSegmented < 0) throw std::invalid_argument("maxSegmented must be >= 0");
  LineMap linesU, linesV;  // ConstU: fixed u; ConstV: fixed v
  for (const auto& m : s.meshlines()) {
    auto& lm = m.dir == LineDir::ConstU ? linesU : linesV;
    lm[m.fixed].push_back({m.start, m.end, m.multiplicity});
  }
  for (auto* lm : {&linesU, &linesV})
    for (auto& [v, segs] : *lm)
      std::sort(segs.begin(), segs.end(), [](const Seg& a, const Seg& b) { return a.s < b.s; });

  // coverage of the line at `fixed` clipped to the piece, empty when the value
  // is not strictly inside the piece
  auto coverage = [&](LineDir dir, double fixed, const Rect& box) -> std::vector<Seg> {
    const LineMap& lm = dir == LineDir::ConstU ? linesU : linesV;
    double flo = dir == LineDir::ConstU ? box.umin : box.vmin;
    double fhi = dir == LineDir::ConstU ? box.umax : box.vmax;
    if (!(flo < fixed && fixed < fhi)) return {};
    auto it = lm.find(fixed);
    if (it == lm.end()) return {};
    double lo = dir == LineDir::ConstU ? box.vmin : box.umin;
    double hi = dir == LineDir::ConstU ? box.vmax : box.umax;
    return clip(it->second, lo, hi);
  };

  auto innerValues = [&](LineDir dir, const Rect& box) {
    std::vector<double> out;
    const LineMap& lm = dir == LineDir::ConstU ? linesU : linesV;
    double flo = dir == LineDir::ConstU ? box.umin : box.vmin;
    double fhi = dir == LineDir::ConstU ? box.umax : box.vmax;
    for (auto it = lm.upper_bound(flo); it != lm.end() && it->first < fhi; ++it)
      if (!coverage(dir, it->first, box).empty()) out.push_back(it->first);
    return out;
  };

  auto partialCount = [&](const Rect& box) {
    int n = 0;
    for (LineDir dir : {LineDir::ConstU, LineDir::ConstV}) {
      double lo = dir == LineDir::ConstU ? box.vmin : box.umin;
      double hi = dir == LineDir::ConstU ? box.vmax : box.umax;
      for (double v : innerValues(dir, box))
        if (!covers(coverage(dir, v, box), lo, hi)) ++n;
    }
    return n;
  };

  // a split at (dir, a) needs an orthogonal knot line ending at a inside the piece
  auto hasTJoint = [&](LineDir dir, double a, const Rect& box) {
    LineDir od = dir == LineDir::ConstU ? LineDir::ConstV : LineDir::ConstU;
    for (double v : innerValues(od, box))
      for (const auto& g : coverage(od, v, box))
        if (g.s == a || g.e == a) return true;
    return false;
  };

  auto score = [&](LineDir dir, double a, const Rect& box, int depth) {
    auto cov = coverage(dir, a, box);
    int newCross = 0;
    for (const auto& el : s.elements()) {
      const Rect& b = el.box;
      double ix0 = std::max(b.umin, box.umin), ix1 = std::min(b.umax, box.umax);
      double iy0 = std::max(b.vmin, box.vmin), iy1 = std::min(b.vmax, box.vmax);
      if (!(ix0 < ix1 && iy0 < iy1)) continue;
      bool straddles = dir == LineDir::ConstU ? (ix0 < a && a < ix1) : (iy0 < a && a < iy1);
      if (!straddles) continue;
      double lo = dir == LineDir::ConstU ? iy0 : ix0;
      double hi = dir == LineDir::ConstU ? iy1 : ix1;
      if (!covers(cov, lo, hi)) ++newCross;
    }
    Rect left = box, right = box;
    if (dir == LineDir::ConstU) {
      left.umax = a;
      right.umin = a;
    } else {
      left.vmax = a;
      right.vmin = a;
    }
    auto knots = [&](const Rect& b) {
      return static_cast<int>(innerValues(LineDir::ConstU, b).size() +
                              innerValues(LineDir::ConstV, b).size());
    };
    double wa = std::clamp(0.9 - 0.1 * depth, 0.1, 0.9);
    return wa * newCross + (1.0 - wa) * std::abs(knots(left) - knots(right));
  };

  TPPatchSet out;
  int p1 = s.degreeU(), p2 = s.degreeV();

  auto complete = [&](const Rect& box) {
    // knot multiplicities inside the piece, taken from the local knot vectors
    std::map<double, int> um, vm;
    for (int id : s.bsplineIds()) {
      Rect sup = s.supportOf(id);
      if (!(std::max(sup.umin, box.umin) < std::min(sup.umax, box.umax) &&
            std::max(sup.vmin, box.vmin) < std::min(sup.vmax, box.vmax)))
        continue;
      ScaledTensorBSpline b = s.bspline(id);
      auto add = [](std::map<double, int>& m, const std::vector<double>& k, double lo,
                    double hi) {
        size_t i = 0;
        while (i < k.size()) {
          size_t j = i;
          while (j < k.size() && k[j] == k[i]) ++j;
          if (lo < k[i] && k[i] < hi) {
            int& c = m[k[i]];
            c = std::max(c, static_cast<int>(j - i));
          }
          i = j;
        }
      };
      add(um, b.uknots.values, box.umin, box.umax);
      add(vm, b.vknots.values, box.vmin, box.vmax);
    }
    auto build = [](double lo, double hi, const std::map<double, int>& m, int p) {
      std::vector<double> k(p + 1, lo);
      for (auto [v, c] : m) k.insert(k.end(), c, v);
      k.insert(k.end(), p + 1, hi);
      return GlobalKnotVector(std::move(k), p);
    };
    GlobalKnotVector ku = build(box.umin, box.umax, um, p1);
    GlobalKnotVector kv = build(box.vmin, box.vmax, vm, p2);
    int nu = ku.numBasis(), nv = kv.numBasis();

    auto greville = [](const GlobalKnotVector& k) {
      std::vector<double> g(k.numBasis());
      for (int i = 0; i < k.numBasis(); ++i) {
        double sum = 0;
        for (int j = 1; j <= k.degree; ++j) sum += k.values[i + j];
        g[i] = k.degree > 0 ? sum / k.degree : 0.5 * (k.values[i] + k.values[i + 1]);
      }
      return g;
    };
    auto gu = greville(ku), gv = greville(kv);

    auto colloc = [&](const GlobalKnotVector& k, const std::vector<double>& g) {
      int n = k.numBasis();
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        BasisValues bv = basisValues(k, g[i]);
        for (int j = 0; j <= k.degree; ++j) A(i, bv.first + j) = bv.v[j];
      }
      return A;
    };
    Eigen::MatrixXd F(nu, nv);
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nv; ++j) F(i, j) = s.evaluate(gu[i], gv[j]);
    Eigen::MatrixXd X = colloc(ku, gu).partialPivLu().solve(F);
    Eigen::MatrixXd C = colloc(kv, gv).partialPivLu().solve(X.transpose()).transpose();

    std::vector<double> coefs(static_cast<size_t>(nu) * nv);
    for (int j = 0; j < nv; ++j)
      for (int i = 0; i < nu; ++i) coefs[i + static_cast<size_t>(j) * nu] = C(i, j);
    out.patches.push_back({box, TPSurface(ku, kv, std::move(coefs))});
  };

  struct Job {
    Rect box;
    int depth;
  };
  std::vector<Job> stack{{s.domain(), 0}};
  while (!stack.empty()) {
    Job job = stack.back();
    stack.pop_back();
    if (partialCount(job.box) <= maxSegmented) {
      complete(job.box);
      continue;
    }
    LineDir bestDir = LineDir::ConstU;
    double bestVal = 0, bestScore = std::numeric_limits<double>::infinity();
    for (LineDir dir : {LineDir::ConstU, LineDir::ConstV}) {
      for (double v : innerValues(dir, job.box)) {
        if (!hasTJoint(dir, v, job.box)) continue;
        double sc = score(dir, v, job.box, job.depth);
        if (sc < bestScore) {
          bestScore = sc;
          bestDir = dir;
          bestVal = v;
        }
      }
    }
    if (!std::isfinite(bestScore)) {
      std::ostringstream os;
      os << "piece [" << job.box.umin << "," << job.box.umax << "]x[" << job.box.vmin
         << "," << job.box.vmax << "] has " << partialCount(job.box)
         << " segmented lines but no T-joint candidate; tensor-completed directly";
      out.warnings.push_back(os.str());
      complete(job.box);
      continue;
    }
    Rect left = job.box, right = job.box;
    if (bestDir == LineDir::ConstU) {
      left.umax = bestVal;
      right.umin = bestVal;
    } else {
      left.vmax = bestVal;
      right.vmin = bestVal;
    }
    stack.push_back({right, job.depth + 1});
    stack.push_back({left, job.depth + 1});
  }

  for (size_t i = 0; i < out.patches.size(); ++i)
    for (size_t j = i + 1; j < out.patches.size(); ++j) {
      const Rect& a = out.patches[i].box;
      const Rect& b = out.patches[j].box;
      bool vert = (a.umax == b.umin || b.umax == a.umin) &&
                  std::min(a.vmax, b.vmax) > std::max(a.vmin, b.vmin);
      bool horz = (a.vmax == b.vmin || b.vmax == a.vmin) &&
                  std::min(a.umax, b.umax) > std::max(a.umin, b.umin);
      if (vert || horz)
        out.adjacency.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  return out;
}

}  // namespace lrfit
