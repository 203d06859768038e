#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "lrfit/fitting.hpp"
#include "test_util.hpp"

using namespace lrfit;
using testutil::gaussianBumpCloud;
using testutil::randomTPSurface;

namespace {

PointCloud sampleSurface(std::mt19937& rng, const TPSurface& tp, size_t n,
                         double lo = 0.0, double hi = 10.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  PointCloud cloud;
  cloud.pts.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    double x = d(rng), y = d(rng);
    cloud.pts.push_back({x, y, tp.eval(x, y)});
  }
  return cloud;
}

}  // namespace

TEST_CASE("elevation dependent tolerance") {
  ThresholdSpec t{{{-27.94, 0.31176}, {-0.55, 0.20022}}};
  CHECK(t.eval(-27.94) == doctest::Approx(0.31176));
  CHECK(t.eval(-100.0) == doctest::Approx(0.31176));
  CHECK(t.eval(-0.55) == doctest::Approx(0.20022));
  CHECK(t.eval(5.0) == doctest::Approx(0.20022));
  double zm = 0.5 * (-27.94 + -0.55);
  CHECK(t.eval(zm) == doctest::Approx(0.5 * (0.31176 + 0.20022)).epsilon(1e-12));
  ThresholdSpec c = ThresholdSpec::constant(0.5);
  CHECK(c.eval(-3.0) == doctest::Approx(0.5));
  CHECK(c.eval(42.0) == doctest::Approx(0.5));
}

TEST_CASE("named configurations") {
  FitConfig f7 = FitConfig::preset("F7");
  CHECK(f7.maxIterations == 7);
  CHECK(f7.threshold.breakpoints.size() == 1);
  CHECK(f7.threshold.eval(0.0) == doctest::Approx(0.5));
  CHECK(f7.weightedMid == false);

  FitConfig v9 = FitConfig::preset("V9");
  CHECK(v9.maxIterations == 9);
  CHECK(v9.threshold.eval(-30.0) == doctest::Approx(0.31176));
  CHECK(v9.threshold.eval(0.0) == doctest::Approx(0.20022));

  CHECK(FitConfig::preset("V9E1").minElemU == doctest::Approx(1.0));
  CHECK(FitConfig::preset("V9E2").minElemV == doctest::Approx(2.0));
  CHECK(FitConfig::preset("WM7").weightedMid == true);
  CHECK(FitConfig::preset("FS7").significantTol == doctest::Approx(0.2));
  CHECK(FitConfig::preset("FS9").maxIterations == 9);
  CHECK_THROWS_AS(FitConfig::preset("nope"), std::invalid_argument);
}

TEST_CASE("configuration file round trip") {
  FitConfig c;
  c.degreeU = 3;
  c.maxIterations = 5;
  c.threshold = ThresholdSpec{{{-27.94, 0.31176}, {-0.55, 0.20022}}};
  c.initialGridU = 12;
  c.alpha1 = 1e-6;
  c.w2 = 0.25;
  c.lsIterations = 2;
  c.mbaPasses = 4;
  c.minElemU = 1.5;
  c.significantWeight = 8;
  c.significantTol = 0.25;
  c.weightedMid = true;
  c.midD1 = -15;
  c.midD2 = -1;
  auto path = (std::filesystem::temp_directory_path() / "lrfit_cfg_test.txt").string();
  c.save(path);
  FitConfig r = FitConfig::fromFile(path);
  CHECK(r.degreeU == 3);
  CHECK(r.degreeV == 2);
  CHECK(r.maxIterations == 5);
  CHECK(r.threshold.breakpoints.size() == 2);
  CHECK(r.threshold.eval(-30.0) == doctest::Approx(0.31176));
  CHECK(r.initialGridU == 12);
  CHECK(r.initialGridV == 10);
  CHECK(r.alpha1 == doctest::Approx(1e-6));
  CHECK(r.w2 == doctest::Approx(0.25));
  CHECK(r.lsIterations == 2);
  CHECK(r.mbaPasses == 4);
  CHECK(r.minElemU == doctest::Approx(1.5));
  CHECK(r.significantWeight == doctest::Approx(8));
  CHECK(r.significantTol == doctest::Approx(0.25));
  CHECK(r.weightedMid == true);
  CHECK(r.midD1 == doctest::Approx(-15));
  CHECK(r.midD2 == doctest::Approx(-1));
  std::remove(path.c_str());

  std::ofstream bad(path);
  bad << "no_such_key=1\n";
  bad.close();
  CHECK_THROWS_AS(FitConfig::fromFile(path), std::invalid_argument);
  std::remove(path.c_str());
}

TEST_CASE("initial fit of a constant cloud") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  PointCloud cloud;
  for (int i = 0; i < 600; ++i) cloud.pts.push_back({d(rng), d(rng), 3.0});
  FitConfig cfg;
  LRSurface s = initialFit(cloud, cfg);
  for (int q = 0; q < 100; ++q) {
    auto bb = cloud.bbox();
    double x = bb.xmin + (bb.xmax - bb.xmin) * 0.01 * (q % 100);
    double y = bb.ymin + (bb.ymax - bb.ymin) * 0.01 * ((q * 37) % 100);
    CHECK(std::abs(s.evaluate(x, y) - 3.0) < 1e-6);
  }
}

TEST_CASE("least squares recovers a spline in the same space") {
  std::mt19937 rng(22);
  TPSurface tp = randomTPSurface(rng, 8, 8, 2);
  PointCloud cloud = sampleSurface(rng, tp, 3000);
  LRSurface s = LRSurface::fromTensorProduct(tp);
  for (int id : s.bsplineIds()) s.setCoef(id, 0.0);
  FitConfig cfg;
  leastSquaresFit(s, cloud, cfg);
  double worst = 0;
  for (const auto& p : cloud.pts)
    worst = std::max(worst, std::abs(s.evaluate(p.x, p.y) - p.z));
  CHECK(worst < 1e-6);
}

TEST_CASE("doubling a weight equals duplicating the point") {
  std::mt19937 rng(23);
  TPSurface tp = randomTPSurface(rng, 6, 6, 2);
  PointCloud cloud = sampleSurface(rng, tp, 1500);
  for (auto& p : cloud.pts) p.z += 0.01 * std::sin(p.x * 3 + p.y);

  FitConfig cfg;
  cfg.alpha1 = 0.0;  // pure least squares

  PointCloud doubled = cloud;
  doubled.pts[0].weight = 2.0;
  PointCloud duplicated = cloud;
  duplicated.pts.push_back(cloud.pts[0]);

  LRSurface a = LRSurface::fromTensorProduct(tp);
  LRSurface b = LRSurface::fromTensorProduct(tp);
  leastSquaresFit(a, doubled, cfg);
  leastSquaresFit(b, duplicated, cfg);
  for (int id : a.bsplineIds())
    CHECK(a.coef(id) == doctest::Approx(b.coef(id)).epsilon(1e-7));
}

TEST_CASE("significant points pull the fit harder as their weight grows") {
  std::mt19937 rng(24);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  PointCloud cloud;
  for (int i = 0; i < 1200; ++i) cloud.pts.push_back({d(rng), d(rng), 0.0});
  DataPoint sig{5.0, 5.0, 1.0, 1.0, true, 0.0};
  cloud.pts.push_back(sig);

  FitConfig cfg;
  auto misfit = [&](double w) {
    LRSurface s = initialFit(PointCloud{cloud.pts}, cfg);
    leastSquaresFit(s, cloud, cfg, w);
    return std::abs(s.evaluate(sig.x, sig.y) - sig.z);
  };
  double loose = misfit(1.0);
  double tight = misfit(200.0);
  CHECK(tight < loose);
}

TEST_CASE("accuracy statistics") {
  std::mt19937 rng(25);
  TPSurface tp = randomTPSurface(rng, 8, 8, 2);
  PointCloud cloud = sampleSurface(rng, tp, 500);
  LRSurface s = LRSurface::fromTensorProduct(tp);
  FitConfig cfg;

  auto exact = computeAccuracy(s, cloud, cfg);
  CHECK(exact.report.maxDist < 1e-12);
  CHECK(exact.report.outOfTol == 0);
  CHECK(exact.report.band0 == exact.report.total);
  CHECK(exact.report.total == 500);

  // flat zero surface against known offsets
  TPSurface flat(tp.uknots, tp.vknots, std::vector<double>(64, 0.0));
  LRSurface z = LRSurface::fromTensorProduct(flat);
  PointCloud three;
  three.pts.push_back({1.0, 1.0, 2.85});
  three.pts.push_back({2.0, 2.0, 0.1});
  three.pts.push_back({3.0, 3.0, -0.3});
  three.pts.push_back({50.0, 3.0, 1.0});  // outside the domain
  auto acc = computeAccuracy(z, three, cfg);
  CHECK(acc.report.maxDist == doctest::Approx(2.85));
  CHECK(acc.report.total == 3);
  CHECK(acc.report.outsideDomain == 1);
  CHECK(acc.report.band0 == 1);
  CHECK(acc.report.band1 == 1);
  CHECK(acc.report.band2 == 1);
  CHECK(acc.report.band0 + acc.report.band1 + acc.report.band2 == acc.report.total);
  CHECK(acc.report.outOfTol == 1);  // only |2.85| exceeds 0.5
  CHECK(std::isnan(acc.residuals[3]));
  CHECK(acc.residuals[0] == doctest::Approx(2.85));
}

TEST_CASE("refinement selection") {
  std::mt19937 rng(26);
  TPSurface tp = randomTPSurface(rng, 8, 8, 2);
  PointCloud cloud = sampleSurface(rng, tp, 400);
  LRSurface s = LRSurface::fromTensorProduct(tp);
  FitConfig cfg;

  auto exact = computeAccuracy(s, cloud, cfg);
  CHECK(selectRefinements(s, exact.report, cfg).empty());

  // push one point far out of tolerance
  cloud.pts[0].z += 10.0;
  auto acc = computeAccuracy(s, cloud, cfg);
  auto lines = selectRefinements(s, acc.report, cfg);
  REQUIRE(!lines.empty());
  // every proposed line must be insertable (it splits at least one support)
  for (const auto& m : lines) {
    LRSurface t = s;
    CHECK_NOTHROW(t.insertMeshline(m));
  }

  // a huge minimum element size suppresses all refinement
  cfg.minElemU = cfg.minElemV = 100.0;
  CHECK(selectRefinements(s, acc.report, cfg).empty());
}

TEST_CASE("quasi-interpolation update") {
  std::mt19937 rng(27);
  TPSurface tp = randomTPSurface(rng, 8, 8, 2);
  PointCloud cloud = sampleSurface(rng, tp, 300);
  LRSurface s = LRSurface::fromTensorProduct(tp);
  FitConfig cfg;

  // zero residuals: a pass must not move any coefficient
  auto before = s.bsplineIds();
  std::vector<double> c0;
  for (int id : before) c0.push_back(s.coef(id));
  mbaUpdate(s, cloud, cfg);
  for (size_t k = 0; k < before.size(); ++k)
    CHECK(s.coef(before[k]) == doctest::Approx(c0[k]).epsilon(1e-13));

  // a single point is interpolated exactly after one pass
  LRSurface z = LRSurface::fromTensorProduct(
      TPSurface(tp.uknots, tp.vknots, std::vector<double>(64, 0.0)));
  PointCloud one;
  one.pts.push_back({4.3, 6.1, 2.0});
  mbaUpdate(z, one, cfg);
  CHECK(z.evaluate(4.3, 6.1) == doctest::Approx(2.0).epsilon(1e-12));

  // locality: coefficients of B-splines not covering the point stay zero
  for (int id : z.bsplineIds())
    if (!z.supportOf(id).contains(4.3, 6.1)) CHECK(z.coef(id) == 0.0);
}

TEST_CASE("adaptive refinement drives points into tolerance") {
  std::mt19937 rng(28);
  PointCloud cloud = gaussianBumpCloud(
      rng, 4000, {{3.0, 3.0, 4.0, 1.2}, {7.0, 6.5, -3.0, 1.5}}, 0.0, 10.0);
  FitConfig cfg;
  cfg.threshold = ThresholdSpec::constant(0.05);
  cfg.maxIterations = 6;
  auto res = adaptiveFit(cloud, cfg);
  REQUIRE(!res.history.empty());
  CHECK(res.history.front().iteration == 0);
  for (size_t i = 1; i < res.history.size(); ++i)
    CHECK(res.history[i].numCoefs >= res.history[i - 1].numCoefs);
  CHECK(res.accuracy.outOfTol < res.history.front().outOfTol);
  CHECK(res.accuracy.outOfTol == res.history.back().outOfTol);
  CHECK(res.accuracy.maxDist < res.history.front().maxDist);
}

TEST_CASE("bounding surfaces") {
  std::mt19937 rng(29);
  TPSurface tp = randomTPSurface(rng, 8, 8, 2);
  LRSurface s = LRSurface::fromTensorProduct(tp);

  // exact data: both bounds coincide with the source
  PointCloud exact = sampleSurface(rng, tp, 400);
  auto [u0, l0] = limitSurfaces(s, exact);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  for (int q = 0; q < 200; ++q) {
    double x = d(rng), y = d(rng);
    CHECK(std::abs(u0.evaluate(x, y) - s.evaluate(x, y)) < 1e-9);
    CHECK(std::abs(l0.evaluate(x, y) - s.evaluate(x, y)) < 1e-9);
  }

  // noisy data: the bounds envelope every point
  PointCloud noisy = exact;
  std::normal_distribution<double> dn(0.0, 0.3);
  for (auto& p : noisy.pts) p.z += dn(rng);
  auto [up, low] = limitSurfaces(s, noisy);
  for (const auto& p : noisy.pts) {
    CHECK(up.evaluate(p.x, p.y) >= p.z - 1e-9);
    CHECK(low.evaluate(p.x, p.y) <= p.z + 1e-9);
  }
}

TEST_CASE("weighted blend of source and upper surface") {
  std::mt19937 rng(30);
  TPSurface tp = randomTPSurface(rng, 6, 6, 2);
  LRSurface src = LRSurface::fromTensorProduct(tp);
  for (int id : src.bsplineIds()) src.setCoef(id, src.coef(id) - 10.0);
  LRSurface up = src;
  for (int id : up.bsplineIds()) up.setCoef(id, up.coef(id) + 1.0);

  // every mid-elevation is near -10, far below d1: blend returns the source
  LRSurface all = weightedMidSurface(src, up, -5.0, 0.0);
  for (int id : src.bsplineIds()) CHECK(all.coef(id) == doctest::Approx(src.coef(id)));
  // far above d2: blend returns the upper surface
  LRSurface none = weightedMidSurface(src, up, -30.0, -25.0);
  for (int id : src.bsplineIds()) CHECK(none.coef(id) == doctest::Approx(up.coef(id)));
  // in between: every coefficient lies between the two inputs
  LRSurface mid = weightedMidSurface(src, up, -15.0, -5.0);
  for (int id : src.bsplineIds()) {
    CHECK(mid.coef(id) >= std::min(src.coef(id), up.coef(id)) - 1e-12);
    CHECK(mid.coef(id) <= std::max(src.coef(id), up.coef(id)) + 1e-12);
  }

  CHECK_THROWS_AS(weightedMidSurface(src, up, 0.0, 0.0), std::invalid_argument);
  LRSurface other = LRSurface::fromTensorProduct(randomTPSurface(rng, 7, 6, 2));
  CHECK_THROWS_AS(weightedMidSurface(src, other, -20.0, 0.0), std::invalid_argument);
}

TEST_CASE("root mean square error") {
  std::mt19937 rng(31);
  TPSurface tp = randomTPSurface(rng, 6, 6, 2);
  LRSurface s = LRSurface::fromTensorProduct(tp);
  PointCloud cloud = sampleSurface(rng, tp, 200);
  CHECK(rmse(cloud, s) < 1e-12);

  LRSurface z = LRSurface::fromTensorProduct(
      TPSurface(tp.uknots, tp.vknots, std::vector<double>(36, 0.0)));
  PointCloud pm;
  pm.pts.push_back({1.0, 1.0, 3.0});
  pm.pts.push_back({2.0, 2.0, -3.0});
  CHECK(rmse(pm, z) == doctest::Approx(3.0));

  PointCloud outside;
  outside.pts.push_back({100.0, 100.0, 0.0});
  CHECK_THROWS_AS(rmse(outside, z), std::invalid_argument);
}

TEST_CASE("degenerate clouds") {
  PointCloud empty;
  CHECK(empty.empty());
  CHECK_THROWS_AS(empty.bbox(), std::invalid_argument);

  PointCloud one;
  one.pts.push_back({2.0, 5.0, 1.5});
  FitConfig cfg;
  cfg.initialGridU = cfg.initialGridV = 3;
  LRSurface s = initialFit(one, cfg);
  Rect d = s.domain();
  CHECK(d.umax - d.umin == doctest::Approx(1.0));
  CHECK(d.vmax - d.vmin == doctest::Approx(1.0));
  CHECK(std::abs(s.evaluate(2.0, 5.0) - 1.5) < 1e-5);
}
