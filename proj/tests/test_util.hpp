#ifndef LRFIT_TEST_UTIL_HPP
#define LRFIT_TEST_UTIL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "lrfit/bspline.hpp"
#include "lrfit/lr_surface.hpp"
#include "lrfit/pointcloud.hpp"

namespace testutil {

using namespace lrfit;

inline TPSurface randomTPSurface(std::mt19937& rng, int n1 = 8, int n2 = 8, int p = 2,
                                 double lo = 0.0, double hi = 10.0) {
  auto ku = GlobalKnotVector::uniformClamped(lo, hi, n1, p);
  auto kv = GlobalKnotVector::uniformClamped(lo, hi, n2, p);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> c(static_cast<size_t>(n1) * n2);
  for (auto& v : c) v = d(rng);
  return TPSurface(ku, kv, std::move(c));
}

/// a random valid meshline: splits the element midpoint across the support of
/// one of the element's B-splines
inline Meshline randomMeshline(std::mt19937& rng, const LRSurface& s) {
  const auto& elems = s.elements();
  for (int attempt = 0; attempt < 200; ++attempt) {
    const Element& el = elems[std::uniform_int_distribution<size_t>(0, elems.size() - 1)(rng)];
    if (el.bsplines.empty()) continue;
    int id = el.bsplines[std::uniform_int_distribution<size_t>(0, el.bsplines.size() - 1)(rng)];
    Rect sup = s.supportOf(id);
    bool constU = std::bernoulli_distribution(0.5)(rng);
    Meshline m;
    if (constU) {
      m.dir = LineDir::ConstU;
      m.fixed = 0.5 * (el.box.umin + el.box.umax);
      m.start = sup.vmin;
      m.end = sup.vmax;
    } else {
      m.dir = LineDir::ConstV;
      m.fixed = 0.5 * (el.box.vmin + el.box.vmax);
      m.start = sup.umin;
      m.end = sup.umax;
    }
    m.multiplicity = 1;
    return m;
  }
  throw std::runtime_error("could not build a random meshline");
}

/// evaluates the surface on a regular grid, exploiting the tensor structure
/// per element (fast path for dense oracles)
inline std::vector<double> gridEval(const LRSurface& s, int nx, int ny) {
  Rect d = s.domain();
  std::vector<double> xs(nx), ys(ny);
  for (int i = 0; i < nx; ++i) xs[i] = d.umin + (d.umax - d.umin) * i / (nx - 1);
  for (int j = 0; j < ny; ++j) ys[j] = d.vmin + (d.vmax - d.vmin) * j / (ny - 1);
  std::vector<double> out(static_cast<size_t>(nx) * ny, 0.0);
  for (const auto& el : s.elements()) {
    auto lox = std::lower_bound(xs.begin(), xs.end(), el.box.umin) - xs.begin();
    auto hix = std::lower_bound(xs.begin(), xs.end(), el.box.umax) - xs.begin();
    if (el.box.umax == d.umax) hix = nx;
    auto loy = std::lower_bound(ys.begin(), ys.end(), el.box.vmin) - ys.begin();
    auto hiy = std::lower_bound(ys.begin(), ys.end(), el.box.vmax) - ys.begin();
    if (el.box.vmax == d.vmax) hiy = ny;
    if (lox >= hix || loy >= hiy) continue;
    for (int id : el.bsplines) {
      ScaledTensorBSpline b = s.bspline(id);
      double c = s.coef(id) * b.scale;
      std::vector<double> uf(hix - lox), vf(hiy - loy);
      for (long i = lox; i < hix; ++i)
        uf[i - lox] = evalUnivariateRaw(b.uknots.values.data(), b.degreeU, xs[i], 0,
                                        xs[i] >= d.umax);
      for (long j = loy; j < hiy; ++j)
        vf[j - loy] = evalUnivariateRaw(b.vknots.values.data(), b.degreeV, ys[j], 0,
                                        ys[j] >= d.vmax);
      for (long j = loy; j < hiy; ++j) {
        double cv = c * vf[j - loy];
        if (cv == 0.0) continue;
        double* row = out.data() + j * nx;
        for (long i = lox; i < hix; ++i) row[i] += cv * uf[i - lox];
      }
    }
  }
  return out;
}

/// marching-squares component count on a value grid at a level; also reports
/// how many components are closed (touch no boundary edge)
struct MarchingResult {
  int components = 0;
  int closedComponents = 0;
};

inline MarchingResult marchingSquares(const std::vector<double>& g, int nx, int ny,
                                      double level) {
  auto val = [&](int i, int j) { return g[static_cast<size_t>(j) * nx + i] - level; };
  // edge ids: horizontal edge (i,j)-(i+1,j): h = j*(nx-1)+i; vertical edge
  // (i,j)-(i,j+1): v = nH + j*nx + i
  long nH = static_cast<long>(ny) * (nx - 1);
  long nE = nH + static_cast<long>(ny - 1) * nx;
  std::vector<long> parent(nE);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<bool> active(nE, false);
  std::function<long(long)> find = [&](long a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto unite = [&](long a, long b) {
    active[a] = active[b] = true;
    parent[find(a)] = find(b);
  };
  auto hEdge = [&](int i, int j) { return static_cast<long>(j) * (nx - 1) + i; };
  auto vEdge = [&](int i, int j) { return nH + static_cast<long>(j) * nx + i; };

  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      bool s00 = val(i, j) > 0, s10 = val(i + 1, j) > 0;
      bool s01 = val(i, j + 1) > 0, s11 = val(i + 1, j + 1) > 0;
      int c = (s00 ? 1 : 0) | (s10 ? 2 : 0) | (s01 ? 4 : 0) | (s11 ? 8 : 0);
      if (c == 0 || c == 15) continue;
      long bottom = hEdge(i, j), top = hEdge(i, j + 1);
      long left = vEdge(i, j), right = vEdge(i + 1, j);
      switch (c) {
        case 1: case 14: unite(bottom, left); break;
        case 2: case 13: unite(bottom, right); break;
        case 4: case 11: unite(left, top); break;
        case 8: case 7: unite(right, top); break;
        case 3: case 12: unite(left, right); break;
        case 5: case 10: unite(bottom, top); break;
        case 6: case 9: {
          // saddle: resolve by the cell-center average
          double mid = 0.25 * (val(i, j) + val(i + 1, j) + val(i, j + 1) + val(i + 1, j + 1));
          bool midPos = mid > 0;
          if ((c == 6) == midPos) {
            unite(bottom, right);
            unite(left, top);
          } else {
            unite(bottom, left);
            unite(right, top);
          }
          break;
        }
      }
    }
  std::vector<long> roots;
  std::vector<bool> openComp;
  for (long e = 0; e < nE; ++e) {
    if (!active[e]) continue;
    long r = find(e);
    bool boundary = false;
    if (e < nH) {
      long j = e / (nx - 1);
      boundary = j == 0 || j == ny - 1;
    } else {
      long i = (e - nH) % nx;
      boundary = i == 0 || i == nx - 1;
    }
    auto it = std::find(roots.begin(), roots.end(), r);
    if (it == roots.end()) {
      roots.push_back(r);
      openComp.push_back(boundary);
    } else if (boundary) {
      openComp[it - roots.begin()] = true;
    }
  }
  MarchingResult res;
  res.components = static_cast<int>(roots.size());
  for (bool o : openComp)
    if (!o) ++res.closedComponents;
  return res;
}

inline PointCloud gaussianBumpCloud(std::mt19937& rng, size_t n,
                                    const std::vector<std::array<double, 4>>& bumps,
                                    double lo, double hi, double noise = 0.0) {
  // each bump: {cx, cy, height, sigma}
  std::uniform_real_distribution<double> du(lo, hi);
  std::normal_distribution<double> dn(0.0, noise > 0 ? noise : 1.0);
  PointCloud cloud;
  cloud.pts.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    double x = du(rng), y = du(rng), z = 0;
    for (const auto& b : bumps) {
      double dx = x - b[0], dy = y - b[1];
      z += b[2] * std::exp(-(dx * dx + dy * dy) / (2 * b[3] * b[3]));
    }
    if (noise > 0) z += dn(rng);
    cloud.pts.push_back({x, y, z});
  }
  return cloud;
}

}  // namespace testutil

#endif
