#ifndef LRFIT_ANALYSIS_HPP
#define LRFIT_ANALYSIS_HPP

#include <string>
#include <utility>
#include <vector>

#include "lrfit/io.hpp"
#include "lrfit/lr_surface.hpp"

namespace lrfit {

struct CurveBranch {
  double level = 0;
  std::vector<std::pair<double, double>> pts;
  bool closed = false;
};

struct ContourSet {
  std::vector<CurveBranch> branches;
  std::vector<std::string> warnings;
};

/// Contour curves of the surface at the given levels. The surface is first
/// split into tensor product pieces; on each piece the contour topology is
/// resolved by recursive subdivision and the branches are traced by a
/// predictor-corrector march, then stitched back together across piece
/// boundaries. With clipToMask, branches are restricted to occupied elements.
ContourSet contour(const LRSurface& s, const std::vector<double>& levels,
                   double tolerance, bool clipToMask = false);

/// Contour branches of a single (clamped) tensor product piece at one level.
std::vector<CurveBranch> contourTP(const TPSurface& tp, double level, double tolerance,
                                   std::vector<std::string>* warnings = nullptr);

/// Stitches branch endpoints that coincide within tol; three or more meeting
/// endpoints form a branch point and stay separate. Branches whose own ends
/// meet become closed.
std::vector<CurveBranch> mergeBranches(std::vector<CurveBranch> branches, double tol,
                                       std::vector<std::string>* warnings = nullptr);

struct ExtremalPoint {
  double x = 0, y = 0, z = 0;
  bool isMax = false;
  double triggerLevel = 0;
  bool insideMask = true;
};

/// Local extrema certified by trigger contours: for every innermost closed
/// contour loop, the enclosed region is searched by Newton iteration on the
/// gradient (multi-start sampling as fallback). Extrema with prominence
/// |z - trigger level| below prominenceFloor are dropped.
std::vector<ExtremalPoint> extremalPoints(const LRSurface& s, const ContourSet& contours,
                                          double prominenceFloor = 0);

/// Slope in degrees, atan(|grad F|), sampled at cell centers.
Raster slopeRaster(const LRSurface& s, double resolution, bool mask = false,
                   double nodata = -9999.0);

void writeContourCSV(const ContourSet& c, const std::string& path);
void writeExtremaCSV(const std::vector<ExtremalPoint>& e, const std::string& path);

}  // namespace lrfit

#endif
