#ifndef LRFIT_POINTCLOUD_HPP
#define LRFIT_POINTCLOUD_HPP

#include <stdexcept>
#include <vector>

namespace lrfit {

/// Scattered terrain/seabed sample. z is elevation in meters, negative below
/// sea level. tol <= 0 means "no individual tolerance".
struct DataPoint {
  double x = 0, y = 0, z = 0;
  double weight = 1.0;
  bool significant = false;
  double tol = 0.0;
};

struct PointCloud {
  std::vector<DataPoint> pts;

  size_t size() const { return pts.size(); }
  bool empty() const { return pts.empty(); }

  struct BBox {
    double xmin, xmax, ymin, ymax, zmin, zmax;
  };
  BBox bbox() const {
    if (pts.empty()) throw std::invalid_argument("empty point cloud");
    BBox b{pts[0].x, pts[0].x, pts[0].y, pts[0].y, pts[0].z, pts[0].z};
    for (const auto& p : pts) {
      b.xmin = std::min(b.xmin, p.x);
      b.xmax = std::max(b.xmax, p.x);
      b.ymin = std::min(b.ymin, p.y);
      b.ymax = std::max(b.ymax, p.y);
      b.zmin = std::min(b.zmin, p.z);
      b.zmax = std::max(b.zmax, p.z);
    }
    return b;
  }
};

}  // namespace lrfit

#endif
