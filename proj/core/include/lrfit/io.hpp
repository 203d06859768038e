#ifndef LRFIT_IO_HPP
#define LRFIT_IO_HPP

#include <string>
#include <utility>
#include <vector>

#include "lrfit/lr_surface.hpp"
#include "lrfit/pointcloud.hpp"

namespace lrfit {

/// Regular elevation grid; values row-major with row 0 = northernmost.
struct Raster {
  int ncols = 0, nrows = 0;
  double xll = 0, yll = 0;  // lower-left corner
  double cellsize = 1.0;
  double nodata = -9999.0;
  std::vector<double> values;

  double& at(int col, int row) { return values[static_cast<size_t>(row) * ncols + col]; }
  double at(int col, int row) const {
    return values[static_cast<size_t>(row) * ncols + col];
  }
  double centerX(int col) const { return xll + (col + 0.5) * cellsize; }
  double centerY(int row) const { return yll + (nrows - row - 0.5) * cellsize; }
};

struct TPPatch {
  Rect box;
  TPSurface surf;
};

struct TPPatchSet {
  std::vector<TPPatch> patches;
  std::vector<std::pair<int, int>> adjacency;  // indices of edge-sharing patches
  std::vector<std::string> warnings;
};

PointCloud readXYZ(const std::string& path);
void writeXYZ(const PointCloud& cloud, const std::string& path);

void writeLRSurf(const LRSurface& s, const std::string& path);
LRSurface readLRSurf(const std::string& path);

void writeASC(const Raster& r, const std::string& path);
Raster readASC(const std::string& path);

/// Samples the surface at cell centers over its bounding box. Centers outside
/// the domain, or (with mask) inside unoccupied elements, become nodata.
Raster rasterFromSurface(const LRSurface& s, double cellsize, bool mask = false,
                         double nodata = -9999.0);

/// Radius-limited inverse distance weighting of the cloud onto a grid over its
/// bounding box. Weight ((R-d)/(R d))^2, points beyond R excluded; a point
/// within 1e-12 of the center wins outright; empty neighborhoods give nodata.
Raster idwRaster(const PointCloud& cloud, double cellsize, double R = 20.0,
                 double nodata = -9999.0);

/// Bilinear interpolation between the four surrounding cell centers; nodata if
/// any of them is nodata. (x,y) must lie within the center grid.
double rasterBilinearEval(const Raster& r, double x, double y);

/// Recursively splits the LR surface into tensor product patches. Split lines
/// are knot-line extensions with a T-joint; the score balances newly crossed
/// elements against knot-count imbalance, shifting from the former to the
/// latter with recursion depth. Recursion stops once a piece has at most
/// maxSegmented partial knot lines; each piece is then completed to a tensor
/// product surface reproducing the LR surface exactly.
TPPatchSet splitToTP(const LRSurface& s, int maxSegmented);

}  // namespace lrfit

#endif
