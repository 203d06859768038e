#ifndef LRFIT_FITTING_HPP
#define LRFIT_FITTING_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrfit/lr_surface.hpp"
#include "lrfit/pointcloud.hpp"

namespace lrfit {

/// Tolerance as a function of elevation: piecewise linear between breakpoints
/// (z, eps), constant outside the covered z range. A single breakpoint gives a
/// fixed tolerance.
struct ThresholdSpec {
  std::vector<std::pair<double, double>> breakpoints;  // sorted by z

  double eval(double z) const;
  static ThresholdSpec constant(double eps) { return ThresholdSpec{{{0.0, eps}}}; }
};

struct FitConfig {
  int degreeU = 2, degreeV = 2;
  int maxIterations = 7;
  ThresholdSpec threshold = ThresholdSpec::constant(0.5);
  int initialGridU = 10, initialGridV = 10;  // coefficients per direction
  double alpha1 = 1e-9;                      // smoothness weight; data weight is 1-alpha1
  double w2 = 0.5, w3 = 0.5;                 // 2nd/3rd order smoothness mix
  int lsIterations = 3;                      // iterations solved by least squares
  int mbaPasses = 2;                         // MBA passes per later iteration
  double minElemU = 0, minElemV = 0;         // 0 = unrestricted
  double significantWeight = 5.0;
  double significantFinalWeight = 50.0;
  double significantTol = 0.2;
  bool weightedMid = false;
  double midD1 = -20.0, midD2 = 0.0;

  static FitConfig preset(const std::string& name);
  static FitConfig fromFile(const std::string& path);
  void save(const std::string& path) const;
};

struct ElementRecord {
  int points = 0;
  double maxDist = 0.0;
  int outOfTol = 0;
};

struct AccuracyReport {
  double maxDist = 0.0, avgDist = 0.0;
  long long band0 = 0, band1 = 0, band2 = 0;  // |r| in [0,0.2), [0.2,0.5), [0.5,inf)
  long long outOfTol = 0;
  long long total = 0;
  long long outsideDomain = 0;
  std::vector<ElementRecord> perElement;  // indexed like surface.elements()
};

struct AccuracyResult {
  AccuracyReport report;
  std::vector<double> residuals;  // z - F(x,y), NaN for out-of-domain points
};

struct IterationRecord {
  int iteration = 0;
  int numCoefs = 0;
  double maxDist = 0.0, avgDist = 0.0;
  long long outOfTol = 0;
  long long band0 = 0, band1 = 0, band2 = 0;
};

struct AdaptiveFitResult {
  LRSurface surface;
  AccuracyReport accuracy;
  std::vector<IterationRecord> history;
};

/// Least squares fit on a uniform tensor product space over the cloud bbox.
LRSurface initialFit(const PointCloud& cloud, const FitConfig& cfg);

/// Distances of all points to the surface, aggregated globally and per element.
/// Marks element occupancy on the surface as a side effect.
AccuracyResult computeAccuracy(LRSurface& surface, const PointCloud& cloud,
                               const FitConfig& cfg);

/// Meshlines refining every element that still has an out-of-tolerance point:
/// split at the midpoint of the longer element direction, spanning the
/// smallest overlapping B-spline support. Candidates violating the minimum
/// element size are retried in the other direction, then dropped.
std::vector<Meshline> selectRefinements(const LRSurface& surface,
                                        const AccuracyReport& acc,
                                        const FitConfig& cfg);

/// Penalized least squares: minimizes alpha1*J(F) + (1-alpha1)*sum w (F-z)^2
/// where J blends 2nd and 3rd order smoothness. sigWeight overrides the
/// weight multiplier for significant points (0 = take it from cfg).
void leastSquaresFit(LRSurface& surface, const PointCloud& cloud,
                     const FitConfig& cfg, double sigWeight = 0);

/// One multilevel B-spline approximation pass: adds a quasi-interpolant of the
/// current residuals to the surface coefficients.
void mbaUpdate(LRSurface& surface, const PointCloud& cloud, const FitConfig& cfg,
               double sigWeight = 0);

/// Full adaptive refinement loop.
AdaptiveFitResult adaptiveFit(const PointCloud& cloud, const FitConfig& cfg);

/// Upper and lower bounding surfaces on the same spline space as `source`,
/// obtained by MBA fits of the positive/negative residuals plus a per-function
/// coefficient shift that guarantees the bound.
std::pair<LRSurface, LRSurface> limitSurfaces(const LRSurface& source,
                                              const PointCloud& cloud);

/// Convex combination of source and upper surface, per coefficient, with a
/// blending factor driven by the local mid-elevation d: weight 1 for d <= d1,
/// 0 for d >= d2, linear in between. Both surfaces must share a spline space.
LRSurface weightedMidSurface(const LRSurface& source, const LRSurface& upper,
                             double d1, double d2);

double rmse(const PointCloud& cloud, const LRSurface& surface);

}  // namespace lrfit

#endif
