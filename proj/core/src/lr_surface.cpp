#include "lrfit/lr_surface.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace lrfit {

namespace {

int idxOf(const std::vector<double>& knots, double a) {
  auto it = std::lower_bound(knots.begin(), knots.end(), a);
  if (it == knots.end() || *it != a) return -1;
  return static_cast<int>(it - knots.begin());
}

}  // namespace

uint64_t LRSurface::tupleHash(const std::vector<int>& a, const std::vector<int>& b) const {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  };
  for (int i : a) mix(static_cast<uint64_t>(i) * 2 + 1);
  mix(0xabcdefull);
  for (int i : b) mix(static_cast<uint64_t>(i) * 2 + 1);
  return h;
}

int LRSurface::findDuplicate(const BS& b) const {
  auto it = dup_.find(tupleHash(b.uidx, b.vidx));
  if (it == dup_.end()) return -1;
  for (int id : it->second) {
    const BS& c = store_[id];
    if (c.alive && c.uidx == b.uidx && c.vidx == b.vidx) return id;
  }
  return -1;
}

void LRSurface::registerDup(int id) {
  dup_[tupleHash(store_[id].uidx, store_[id].vidx)].push_back(id);
}

void LRSurface::unregisterDup(int id) {
  auto it = dup_.find(tupleHash(store_[id].uidx, store_[id].vidx));
  if (it == dup_.end()) return;
  auto& v = it->second;
  v.erase(std::remove(v.begin(), v.end(), id), v.end());
  if (v.empty()) dup_.erase(it);
}

Rect LRSurface::supportOf(const BS& b) const {
  return {knotsU_[b.uidx.front()], knotsU_[b.uidx.back()],
          knotsV_[b.vidx.front()], knotsV_[b.vidx.back()]};
}

Rect LRSurface::supportOf(int id) const { return supportOf(store_[id]); }

Rect LRSurface::domain() const {
  return {knotsU_.front(), knotsU_.back(), knotsV_.front(), knotsV_.back()};
}

std::pair<double, double> LRSurface::grevillePoint(int id) const {
  const BS& b = store_[id];
  double su = 0.0, sv = 0.0;
  for (int j = 1; j <= degU_; ++j) su += knotsU_[b.uidx[j]];
  for (int j = 1; j <= degV_; ++j) sv += knotsV_[b.vidx[j]];
  return {degU_ > 0 ? su / degU_ : knotsU_[b.uidx[0]],
          degV_ > 0 ? sv / degV_ : knotsV_[b.vidx[0]]};
}

ScaledTensorBSpline LRSurface::bspline(int id) const {
  const BS& b = store_[id];
  std::vector<double> uk(b.uidx.size()), vk(b.vidx.size());
  for (size_t i = 0; i < b.uidx.size(); ++i) uk[i] = knotsU_[b.uidx[i]];
  for (size_t i = 0; i < b.vidx.size(); ++i) vk[i] = knotsV_[b.vidx[i]];
  return ScaledTensorBSpline(LocalKnots(std::move(uk)), LocalKnots(std::move(vk)),
                             b.scale, b.coef);
}

void LRSurface::forEachBSpline(const std::function<void(int)>& fn) const {
  for (int id = 0; id < static_cast<int>(store_.size()); ++id)
    if (store_[id].alive) fn(id);
}

std::vector<int> LRSurface::bsplineIds() const {
  std::vector<int> ids;
  ids.reserve(aliveCount_);
  forEachBSpline([&](int id) { ids.push_back(id); });
  return ids;
}

int LRSurface::cellIndex(double u, double v) const {
  int nu = static_cast<int>(knotsU_.size());
  int nv = static_cast<int>(knotsV_.size());
  int iu = static_cast<int>(std::upper_bound(knotsU_.begin(), knotsU_.end(), u) -
                            knotsU_.begin()) - 1;
  int iv = static_cast<int>(std::upper_bound(knotsV_.begin(), knotsV_.end(), v) -
                            knotsV_.begin()) - 1;
  iu = std::clamp(iu, 0, nu - 2);
  iv = std::clamp(iv, 0, nv - 2);
  return iu + iv * (nu - 1);
}

int LRSurface::elementAt(double u, double v) const {
  Rect d = domain();
  if (u < d.umin || u > d.umax || v < d.vmin || v > d.vmax)
    throw std::domain_error("parameter outside surface domain");
  return cellElem_[cellIndex(u, v)];
}

void LRSurface::clearOccupancy() {
  for (auto& e : elements_) e.occupied = false;
}

double LRSurface::evalBasis(int id, double u, double v, int du, int dv) const {
  const BS& b = store_[id];
  double uk[16], vk[16];
  for (size_t i = 0; i < b.uidx.size(); ++i) uk[i] = knotsU_[b.uidx[i]];
  for (size_t i = 0; i < b.vidx.size(); ++i) vk[i] = knotsV_[b.vidx[i]];
  bool cru = (u >= knotsU_.back());
  bool crv = (v >= knotsV_.back());
  double bu = evalUnivariateRaw(uk, degU_, u, du, cru);
  if (bu == 0.0) return 0.0;
  return b.scale * bu * evalUnivariateRaw(vk, degV_, v, dv, crv);
}

std::vector<std::pair<int, double>> LRSurface::basisAt(double u, double v, int du,
                                                       int dv) const {
  int e = elementAt(u, v);
  std::vector<std::pair<int, double>> out;
  out.reserve(elements_[e].bsplines.size());
  for (int id : elements_[e].bsplines) out.emplace_back(id, evalBasis(id, u, v, du, dv));
  return out;
}

double LRSurface::evaluate(double u, double v, int du, int dv) const {
  int e = elementAt(u, v);
  double sum = 0.0;
  for (int id : elements_[e].bsplines)
    sum += store_[id].coef * evalBasis(id, u, v, du, dv);
  return sum;
}

int LRSurface::ensureValue(std::vector<double>& knots, bool isU, double a) {
  auto it = std::lower_bound(knots.begin(), knots.end(), a);
  if (it != knots.end() && *it == a) return static_cast<int>(it - knots.begin());
  int pos = static_cast<int>(it - knots.begin());
  if (pos == 0 || pos == static_cast<int>(knots.size()))
    throw std::domain_error("knot value outside surface domain");
  knots.insert(it, a);
  for (auto& b : store_) {
    auto& idx = isU ? b.uidx : b.vidx;
    for (int& i : idx)
      if (i >= pos) ++i;
  }
  dup_.clear();
  for (int id = 0; id < static_cast<int>(store_.size()); ++id)
    if (store_[id].alive) registerDup(id);
  // widen the cell grid: the strip [knots[pos-1], knots[pos+1]] splits in two,
  // both halves belong to the same elements as before
  int nu = static_cast<int>(knotsU_.size());
  int nv = static_cast<int>(knotsV_.size());
  // note: `knots` already contains the new value; recover old dims
  int onu = isU ? nu - 1 : nu;
  int onv = isU ? nv : nv - 1;
  std::vector<int> grid(static_cast<size_t>(nu > 1 ? nu - 1 : 1) *
                        (nv > 1 ? nv - 1 : 1));
  auto oldCell = [&](int iu, int iv) { return cellElem_[iu + iv * (onu - 1)]; };
  for (int iv = 0; iv < nv - 1; ++iv)
    for (int iu = 0; iu < nu - 1; ++iu) {
      int ou = iu, ov = iv;
      if (isU) ou = (iu < pos) ? iu : iu - 1;
      else ov = (iv < pos) ? iv : iv - 1;
      grid[iu + static_cast<size_t>(iv) * (nu - 1)] = oldCell(ou, ov);
    }
  cellElem_ = std::move(grid);
  return pos;
}

void LRSurface::addSegments(SegMap& lines, double fixed, double s, double e, int mult,
                            std::vector<std::pair<double, double>>& newlyCovered) {
  auto& segs = lines[fixed];
  std::vector<double> brk{s, e};
  for (const Seg& g : segs) {
    brk.push_back(g.start);
    brk.push_back(g.end);
  }
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
  std::vector<Seg> out;
  for (size_t i = 0; i + 1 < brk.size(); ++i) {
    double a = brk[i], b = brk[i + 1];
    double mid = 0.5 * (a + b);
    int m0 = 0;
    for (const Seg& g : segs)
      if (g.start <= mid && mid < g.end) m0 = g.mult;
    int m1 = m0;
    if (a >= s && b <= e) m1 += mult;
    if (m1 > 0) {
      if (m0 == 0 && m1 > 0 && a >= s && b <= e) {
        if (!newlyCovered.empty() && newlyCovered.back().second == a)
          newlyCovered.back().second = b;
        else
          newlyCovered.emplace_back(a, b);
      }
      if (!out.empty() && out.back().end == a && out.back().mult == m1)
        out.back().end = b;
      else
        out.push_back({a, b, m1});
    }
  }
  segs = std::move(out);
}

bool LRSurface::lineSplits(const BS& b, LineDir dir, double fixed,
                           const std::vector<Seg>& segs) const {
  const std::vector<int>& fIdx = (dir == LineDir::ConstU) ? b.uidx : b.vidx;
  const std::vector<int>& oIdx = (dir == LineDir::ConstU) ? b.vidx : b.uidx;
  const std::vector<double>& fKnots = (dir == LineDir::ConstU) ? knotsU_ : knotsV_;
  const std::vector<double>& oKnots = (dir == LineDir::ConstU) ? knotsV_ : knotsU_;
  double lo = fKnots[fIdx.front()], hi = fKnots[fIdx.back()];
  if (!(fixed > lo && fixed < hi)) return false;
  int count = 0;
  for (int i : fIdx)
    if (fKnots[i] == fixed) ++count;
  int need = count + 1;
  double s = oKnots[oIdx.front()], e = oKnots[oIdx.back()];
  // the line must traverse [s,e] with multiplicity >= need everywhere
  double pos = s;
  for (const Seg& g : segs) {
    if (g.end <= pos) continue;
    if (g.start > pos) return false;
    if (g.mult < need) return false;
    pos = g.end;
    if (pos >= e) return true;
  }
  return pos >= e;
}

bool LRSurface::findSplit(const BS& b, LineDir& dir, double& value) const {
  double u0 = knotsU_[b.uidx.front()], u1 = knotsU_[b.uidx.back()];
  for (auto it = linesU_.upper_bound(u0); it != linesU_.end() && it->first < u1; ++it)
    if (lineSplits(b, LineDir::ConstU, it->first, it->second)) {
      dir = LineDir::ConstU;
      value = it->first;
      return true;
    }
  double v0 = knotsV_[b.vidx.front()], v1 = knotsV_[b.vidx.back()];
  for (auto it = linesV_.upper_bound(v0); it != linesV_.end() && it->first < v1; ++it)
    if (lineSplits(b, LineDir::ConstV, it->first, it->second)) {
      dir = LineDir::ConstV;
      value = it->first;
      return true;
    }
  return false;
}

void LRSurface::splitBSpline(int id, LineDir dir, double value, std::vector<int>& queue) {
  const BS parent = store_[id];  // copy; store_ may reallocate below
  bool isU = (dir == LineDir::ConstU);
  const std::vector<double>& knots = isU ? knotsU_ : knotsV_;
  const std::vector<int>& fIdx = isU ? parent.uidx : parent.vidx;
  int p = isU ? degU_ : degV_;

  std::vector<double> localVals(fIdx.size());
  for (size_t i = 0; i < fIdx.size(); ++i) localVals[i] = knots[fIdx[i]];
  KnotInsertion ins = insertKnot(LocalKnots(localVals), p, value);

  int vpos = idxOf(knots, value);
  std::vector<int> merged = fIdx;
  merged.insert(std::upper_bound(merged.begin(), merged.end(), vpos), vpos);
  std::vector<int> idx1(merged.begin(), merged.begin() + p + 2);
  std::vector<int> idx2(merged.end() - (p + 2), merged.end());

  const double alphas[2] = {ins.alpha1, ins.alpha2};
  const std::vector<int>* childIdx[2] = {&idx1, &idx2};

  // remove parent first so a child cannot merge into it
  store_[id].alive = false;
  --aliveCount_;
  unregisterDup(id);
  for (int e : parent.elems) {
    auto& lst = elements_[e].bsplines;
    lst.erase(std::remove(lst.begin(), lst.end(), id), lst.end());
  }

  for (int r = 0; r < 2; ++r) {
    BS child;
    child.uidx = isU ? *childIdx[r] : parent.uidx;
    child.vidx = isU ? parent.vidx : *childIdx[r];
    child.scale = parent.scale * alphas[r];
    child.coef = parent.coef;
    int d = findDuplicate(child);
    if (d >= 0) {
      BS& dst = store_[d];
      double snew = dst.scale + child.scale;
      dst.coef = (dst.scale * dst.coef + child.scale * child.coef) / snew;
      dst.scale = snew;
      if (dst.scale > 1.0 + 1e-9)
        throw std::logic_error("scaling factor exceeded 1 during refinement");
    } else {
      Rect sup = {knotsU_[child.uidx.front()], knotsU_[child.uidx.back()],
                  knotsV_[child.vidx.front()], knotsV_[child.vidx.back()]};
      for (int e : parent.elems)
        if (sup.containsRect(elements_[e].box)) child.elems.push_back(e);
      int nid = static_cast<int>(store_.size());
      store_.push_back(std::move(child));
      ++aliveCount_;
      registerDup(nid);
      for (int e : store_[nid].elems) elements_[e].bsplines.push_back(nid);
      queue.push_back(nid);
    }
  }
}

void LRSurface::insertMeshline(const Meshline& m) {
  if (!(m.end > m.start)) throw std::invalid_argument("meshline span is empty");
  if (m.multiplicity < 1) throw std::invalid_argument("meshline multiplicity < 1");
  bool isU = (m.dir == LineDir::ConstU);
  int pf = isU ? degU_ : degV_;
  if (m.multiplicity > pf + 1)
    throw std::invalid_argument("meshline multiplicity exceeds degree+1");
  Rect d = domain();
  double fmin = isU ? d.umin : d.vmin, fmax = isU ? d.umax : d.vmax;
  double omin = isU ? d.vmin : d.umin, omax = isU ? d.vmax : d.umax;
  if (!(m.fixed > fmin && m.fixed < fmax))
    throw std::domain_error("meshline fixed value outside domain interior");
  if (m.start < omin || m.end > omax)
    throw std::domain_error("meshline span outside domain");

  // precondition: the line (merged with existing collinear segments) must
  // split the support of at least one B-spline
  SegMap& lines = isU ? linesU_ : linesV_;
  std::vector<Seg> preview;
  {
    SegMap tmap;
    auto it = lines.find(m.fixed);
    if (it != lines.end()) tmap[m.fixed] = it->second;
    std::vector<std::pair<double, double>> scratch;
    addSegments(tmap, m.fixed, m.start, m.end, m.multiplicity, scratch);
    preview = tmap[m.fixed];
  }
  bool splitsAny = false;
  for (const auto& b : store_)
    if (b.alive && lineSplits(b, m.dir, m.fixed, preview)) {
      splitsAny = true;
      break;
    }
  if (!splitsAny)
    throw std::invalid_argument("meshline does not split any B-spline support");

  // commit: canonicalize knot values, record the line, split crossed elements
  if (isU) {
    ensureValue(knotsU_, true, m.fixed);
    if (m.start > d.vmin) ensureValue(knotsV_, false, m.start);
    if (m.end < d.vmax) ensureValue(knotsV_, false, m.end);
  } else {
    ensureValue(knotsV_, false, m.fixed);
    if (m.start > d.umin) ensureValue(knotsU_, true, m.start);
    if (m.end < d.umax) ensureValue(knotsU_, true, m.end);
  }
  std::vector<std::pair<double, double>> newlyCovered;
  addSegments(lines, m.fixed, m.start, m.end, m.multiplicity, newlyCovered);

  for (auto [s, e] : newlyCovered) {
    int nElems = static_cast<int>(elements_.size());
    for (int ei = 0; ei < nElems; ++ei) {
      Rect box = elements_[ei].box;
      double bmin = isU ? box.umin : box.vmin, bmax = isU ? box.umax : box.vmax;
      double osmin = isU ? box.vmin : box.umin, osmax = isU ? box.vmax : box.umax;
      if (!(bmin < m.fixed && m.fixed < bmax)) continue;
      if (!(s <= osmin && osmax <= e)) continue;
      Element ne;
      ne.occupied = elements_[ei].occupied;
      ne.bsplines = elements_[ei].bsplines;
      ne.box = box;
      if (isU) {
        elements_[ei].box.umax = m.fixed;
        ne.box.umin = m.fixed;
      } else {
        elements_[ei].box.vmax = m.fixed;
        ne.box.vmin = m.fixed;
      }
      int nid = static_cast<int>(elements_.size());
      elements_.push_back(std::move(ne));
      for (int id : elements_[nid].bsplines) store_[id].elems.push_back(nid);
      // redirect cells of the upper half
      const Rect& nb = elements_[nid].box;
      int iu0 = idxOf(knotsU_, nb.umin), iu1 = idxOf(knotsU_, nb.umax);
      int iv0 = idxOf(knotsV_, nb.vmin), iv1 = idxOf(knotsV_, nb.vmax);
      int nu = static_cast<int>(knotsU_.size());
      for (int iv = iv0; iv < iv1; ++iv)
        for (int iu = iu0; iu < iu1; ++iu)
          cellElem_[iu + static_cast<size_t>(iv) * (nu - 1)] = nid;
    }
  }

  // repair: split every B-spline without minimal support, FIFO
  std::vector<int> queue;
  auto segsIt = lines.find(m.fixed);
  for (int id = 0; id < static_cast<int>(store_.size()); ++id)
    if (store_[id].alive && lineSplits(store_[id], m.dir, m.fixed, segsIt->second))
      queue.push_back(id);
  size_t qi = 0;
  while (qi < queue.size()) {
    int id = queue[qi++];
    if (!store_[id].alive) continue;
    LineDir dir;
    double value;
    while (store_[id].alive && findSplit(store_[id], dir, value))
      splitBSpline(id, dir, value, queue);
  }
}

std::vector<Meshline> LRSurface::meshlines() const {
  std::vector<Meshline> out;
  for (const auto& [fixed, segs] : linesU_)
    for (const Seg& g : segs) out.push_back({LineDir::ConstU, fixed, g.start, g.end, g.mult});
  for (const auto& [fixed, segs] : linesV_)
    for (const Seg& g : segs) out.push_back({LineDir::ConstV, fixed, g.start, g.end, g.mult});
  return out;
}

std::vector<LRSurface::BSplineData> LRSurface::bsplineData() const {
  std::vector<BSplineData> out;
  out.reserve(aliveCount_);
  forEachBSpline([&](int id) {
    const BS& b = store_[id];
    out.push_back({b.uidx, b.vidx, b.scale, b.coef});
  });
  return out;
}

LRSurface LRSurface::fromTensorProduct(const TPSurface& s) {
  int p1 = s.uknots.degree, p2 = s.vknots.degree;
  std::vector<double> du = s.uknots.values, dv = s.vknots.values;
  du.erase(std::unique(du.begin(), du.end()), du.end());
  dv.erase(std::unique(dv.begin(), dv.end()), dv.end());
  auto mapIdx = [](const std::vector<double>& dist, double v) {
    return static_cast<int>(std::lower_bound(dist.begin(), dist.end(), v) - dist.begin());
  };
  std::vector<BSplineData> bs;
  bs.reserve(static_cast<size_t>(s.n1()) * s.n2());
  for (int j = 0; j < s.n2(); ++j)
    for (int i = 0; i < s.n1(); ++i) {
      BSplineData b;
      b.uidx.resize(p1 + 2);
      b.vidx.resize(p2 + 2);
      for (int k = 0; k <= p1 + 1; ++k) b.uidx[k] = mapIdx(du, s.uknots.values[i + k]);
      for (int k = 0; k <= p2 + 1; ++k) b.vidx[k] = mapIdx(dv, s.vknots.values[j + k]);
      b.scale = 1.0;
      b.coef = s.coef(i, j);
      bs.push_back(std::move(b));
    }
  return fromData(p1, p2, std::move(du), std::move(dv), std::move(bs));
}

LRSurface LRSurface::fromData(int degU, int degV, std::vector<double> knotsU,
                              std::vector<double> knotsV, std::vector<BSplineData> bs) {
  if (knotsU.size() < 2 || knotsV.size() < 2)
    throw std::invalid_argument("need at least two distinct knots per direction");
  for (size_t i = 0; i + 1 < knotsU.size(); ++i)
    if (!(knotsU[i + 1] > knotsU[i]))
      throw std::invalid_argument("global knot values not strictly increasing");
  for (size_t i = 0; i + 1 < knotsV.size(); ++i)
    if (!(knotsV[i + 1] > knotsV[i]))
      throw std::invalid_argument("global knot values not strictly increasing");

  LRSurface s;
  s.degU_ = degU;
  s.degV_ = degV;
  s.knotsU_ = std::move(knotsU);
  s.knotsV_ = std::move(knotsV);
  int nu = static_cast<int>(s.knotsU_.size());
  int nv = static_cast<int>(s.knotsV_.size());

  for (auto& d : bs) {
    if (static_cast<int>(d.uidx.size()) != degU + 2 ||
        static_cast<int>(d.vidx.size()) != degV + 2)
      throw std::invalid_argument("local knot index count does not match degree");
    for (size_t i = 0; i < d.uidx.size(); ++i) {
      if (d.uidx[i] < 0 || d.uidx[i] >= nu) throw std::invalid_argument("u knot index out of range");
      if (i > 0 && d.uidx[i] < d.uidx[i - 1]) throw std::invalid_argument("u knot indices not monotone");
    }
    for (size_t i = 0; i < d.vidx.size(); ++i) {
      if (d.vidx[i] < 0 || d.vidx[i] >= nv) throw std::invalid_argument("v knot index out of range");
      if (i > 0 && d.vidx[i] < d.vidx[i - 1]) throw std::invalid_argument("v knot indices not monotone");
    }
    if (d.uidx.back() == d.uidx.front() || d.vidx.back() == d.vidx.front())
      throw std::invalid_argument("degenerate B-spline support");
    if (!(d.scale > 0.0) || d.scale > 1.0 + 1e-9)
      throw std::invalid_argument("scaling factor outside (0,1]");
    BS b;
    b.uidx = std::move(d.uidx);
    b.vidx = std::move(d.vidx);
    b.scale = d.scale;
    b.coef = d.coef;
    s.store_.push_back(std::move(b));
  }
  s.aliveCount_ = static_cast<int>(s.store_.size());
  for (int id = 0; id < static_cast<int>(s.store_.size()); ++id) {
    if (s.findDuplicate(s.store_[id]) >= 0)
      throw std::invalid_argument("duplicate B-spline knot vectors");
    s.registerDup(id);
  }

  // reconstruct meshline segments from the B-spline knots (max multiplicity)
  auto accumulate = [&](SegMap& lines, bool uDir) {
    for (const BS& b : s.store_) {
      const auto& fIdx = uDir ? b.uidx : b.vidx;
      const auto& fK = uDir ? s.knotsU_ : s.knotsV_;
      const auto& oIdx = uDir ? b.vidx : b.uidx;
      const auto& oK = uDir ? s.knotsV_ : s.knotsU_;
      double os = oK[oIdx.front()], oe = oK[oIdx.back()];
      size_t i = 0;
      while (i < fIdx.size()) {
        size_t j = i;
        while (j < fIdx.size() && fIdx[j] == fIdx[i]) ++j;
        double val = fK[fIdx[i]];
        int mult = static_cast<int>(j - i);
        auto& segs = lines[val];
        // max-overlay of [os,oe] at multiplicity mult
        std::vector<double> brk{os, oe};
        for (const Seg& g : segs) {
          brk.push_back(g.start);
          brk.push_back(g.end);
        }
        std::sort(brk.begin(), brk.end());
        brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
        std::vector<Seg> out;
        for (size_t k = 0; k + 1 < brk.size(); ++k) {
          double a = brk[k], c = brk[k + 1];
          double mid = 0.5 * (a + c);
          int m0 = 0;
          for (const Seg& g : segs)
            if (g.start <= mid && mid < g.end) m0 = g.mult;
          int m1 = (a >= os && c <= oe) ? std::max(m0, mult) : m0;
          if (m1 > 0) {
            if (!out.empty() && out.back().end == a && out.back().mult == m1)
              out.back().end = c;
            else
              out.push_back({a, c, m1});
          }
        }
        segs = std::move(out);
        i = j;
      }
    }
  };
  accumulate(s.linesU_, true);
  accumulate(s.linesV_, false);

  s.rebuildCells();
  return s;
}

void LRSurface::rebuildCells() {
  int nu = static_cast<int>(knotsU_.size());
  int nv = static_cast<int>(knotsV_.size());
  int cu = nu - 1, cv = nv - 1;
  // union-find over cells; merge neighbours not separated by a mesh line
  std::vector<int> parent(static_cast<size_t>(cu) * cv);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto lineCovers = [](const SegMap& lines, double fixed, double a, double b) {
    auto it = lines.find(fixed);
    if (it == lines.end()) return false;
    double pos = a;
    for (const Seg& g : it->second) {
      if (g.end <= pos) continue;
      if (g.start > pos) return false;
      pos = g.end;
      if (pos >= b) return true;
    }
    return pos >= b;
  };
  for (int iv = 0; iv < cv; ++iv)
    for (int iu = 0; iu < cu; ++iu) {
      int c = iu + iv * cu;
      if (iu + 1 < cu &&
          !lineCovers(linesU_, knotsU_[iu + 1], knotsV_[iv], knotsV_[iv + 1]))
        parent[find(c)] = find(c + 1);
      if (iv + 1 < cv &&
          !lineCovers(linesV_, knotsV_[iv + 1], knotsU_[iu], knotsU_[iu + 1]))
        parent[find(c)] = find(c + cu);
    }
  std::unordered_map<int, int> elemOf;
  elements_.clear();
  cellElem_.assign(static_cast<size_t>(cu) * cv, -1);
  for (int iv = 0; iv < cv; ++iv)
    for (int iu = 0; iu < cu; ++iu) {
      int c = iu + iv * cu;
      int r = find(c);
      auto it = elemOf.find(r);
      int e;
      if (it == elemOf.end()) {
        e = static_cast<int>(elements_.size());
        elemOf.emplace(r, e);
        Element el;
        el.box = {knotsU_[iu], knotsU_[iu + 1], knotsV_[iv], knotsV_[iv + 1]};
        elements_.push_back(el);
      } else {
        e = it->second;
        Element& el = elements_[e];
        el.box.umin = std::min(el.box.umin, knotsU_[iu]);
        el.box.umax = std::max(el.box.umax, knotsU_[iu + 1]);
        el.box.vmin = std::min(el.box.vmin, knotsV_[iv]);
        el.box.vmax = std::max(el.box.vmax, knotsV_[iv + 1]);
      }
      cellElem_[c] = e;
    }
  for (auto& el : elements_) el.bsplines.clear();
  for (int id = 0; id < static_cast<int>(store_.size()); ++id) {
    if (!store_[id].alive) continue;
    store_[id].elems.clear();
  }
  for (int e = 0; e < static_cast<int>(elements_.size()); ++e) {
    for (int id = 0; id < static_cast<int>(store_.size()); ++id) {
      if (!store_[id].alive) continue;
      if (supportOf(store_[id]).containsRect(elements_[e].box)) {
        elements_[e].bsplines.push_back(id);
        store_[id].elems.push_back(e);
      }
    }
  }
}

}  // namespace lrfit
