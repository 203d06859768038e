#ifndef LRFIT_LR_SURFACE_HPP
#define LRFIT_LR_SURFACE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>
#include <vector>

#include "lrfit/bspline.hpp"

namespace lrfit {

enum class LineDir { ConstU, ConstV };

/// Axis-parallel knot line segment: parameter `fixed` is constant, the
/// segment spans [start,end] in the other parameter.
struct Meshline {
  LineDir dir = LineDir::ConstU;
  double fixed = 0.0;
  double start = 0.0, end = 0.0;
  int multiplicity = 1;
};

/// Mesh cell between adjacent knot lines.
struct Element {
  Rect box;
  std::vector<int> bsplines;  // ids of B-splines whose support contains box
  bool occupied = false;
};

/// LR B-spline surface: collection of scaled tensor product B-splines over
/// a locally refined mesh. Knot values are stored once per direction and
/// referenced by index.
class LRSurface {
 public:
  LRSurface() = default;

  static LRSurface fromTensorProduct(const TPSurface& s);

  /// Inserts a meshline and repairs the collection until every B-spline has
  /// minimal support. Throws std::invalid_argument if the line splits no
  /// B-spline support.
  void insertMeshline(const Meshline& m);

  double evaluate(double u, double v, int du = 0, int dv = 0) const;

  /// ids and values N_B(u,v) of the B-splines overlapping the element at (u,v)
  std::vector<std::pair<int, double>> basisAt(double u, double v, int du = 0,
                                              int dv = 0) const;

  Rect domain() const;
  int degreeU() const { return degU_; }
  int degreeV() const { return degV_; }

  const std::vector<Element>& elements() const { return elements_; }
  int elementAt(double u, double v) const;
  void markOccupied(int elem, bool occ) { elements_[elem].occupied = occ; }
  void clearOccupancy();

  int numBSplines() const { return aliveCount_; }
  /// iterate alive B-spline ids in ascending order
  void forEachBSpline(const std::function<void(int)>& fn) const;
  std::vector<int> bsplineIds() const;

  ScaledTensorBSpline bspline(int id) const;
  double coef(int id) const { return store_[id].coef; }
  void setCoef(int id, double c) { store_[id].coef = c; }
  double scale(int id) const { return store_[id].scale; }
  Rect supportOf(int id) const;
  std::pair<double, double> grevillePoint(int id) const;
  const std::vector<int>& elementsOf(int id) const { return store_[id].elems; }
  double evalBasis(int id, double u, double v, int du = 0, int dv = 0) const;

  const std::vector<double>& knotsU() const { return knotsU_; }
  const std::vector<double>& knotsV() const { return knotsV_; }
  std::vector<Meshline> meshlines() const;

  /// raw access used by file I/O
  struct BSplineData {
    std::vector<int> uidx, vidx;
    double scale = 1.0;
    double coef = 0.0;
  };
  std::vector<BSplineData> bsplineData() const;
  static LRSurface fromData(int degU, int degV, std::vector<double> knotsU,
                            std::vector<double> knotsV, std::vector<BSplineData> bs);

 private:
  struct BS {
    std::vector<int> uidx, vidx;  // p+2 indices into knotsU_/knotsV_
    double scale = 1.0;
    double coef = 0.0;
    bool alive = true;
    std::vector<int> elems;
  };
  struct Seg {
    double start, end;
    int mult;
  };
  using SegMap = std::map<double, std::vector<Seg>>;  // fixed value -> segments

  int degU_ = 0, degV_ = 0;
  std::vector<double> knotsU_, knotsV_;  // distinct, sorted
  std::vector<BS> store_;
  int aliveCount_ = 0;
  std::vector<Element> elements_;
  std::vector<int> cellElem_;  // (|knotsU|-1) x (|knotsV|-1), row-major in u
  SegMap linesU_, linesV_;     // ConstU / ConstV meshlines
  std::unordered_map<uint64_t, std::vector<int>> dup_;  // knot-tuple hash -> ids

  int ensureValue(std::vector<double>& knots, bool isU, double a);
  int cellIndex(double u, double v) const;
  void rebuildCells();
  uint64_t tupleHash(const std::vector<int>& a, const std::vector<int>& b) const;
  int findDuplicate(const BS& b) const;
  void registerDup(int id);
  void unregisterDup(int id);
  double knotValueU(int i) const { return knotsU_[i]; }
  double knotValueV(int i) const { return knotsV_[i]; }
  Rect supportOf(const BS& b) const;
  /// does any stored meshline split b's support? returns the split to apply
  bool findSplit(const BS& b, LineDir& dir, double& value) const;
  bool lineSplits(const BS& b, LineDir dir, double fixed,
                  const std::vector<Seg>& segs) const;
  void splitBSpline(int id, LineDir dir, double value, std::vector<int>& queue);
  void addSegments(SegMap& lines, double fixed, double s, double e, int mult,
                   std::vector<std::pair<double, double>>& newlyCovered);
};

}  // namespace lrfit

#endif
