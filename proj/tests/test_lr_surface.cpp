#include <doctest.h>

#include <random>
#include <set>

#include "lrfit/lr_surface.hpp"
#include "test_util.hpp"

using namespace lrfit;
using testutil::randomMeshline;
using testutil::randomTPSurface;

namespace {

double sumBasis(const LRSurface& s, double u, double v) {
  double sum = 0;
  for (auto [id, val] : s.basisAt(u, v)) sum += val;
  return sum;
}

}  // namespace

TEST_CASE("conversion from tensor product surfaces") {
  auto ku = GlobalKnotVector::uniformClamped(0, 3, 4, 2);
  TPSurface tp(ku, ku, std::vector<double>(16, 3.0));
  LRSurface s = LRSurface::fromTensorProduct(tp);
  CHECK(s.numBSplines() == 16);
  for (int id : s.bsplineIds()) CHECK(s.scale(id) == 1.0);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> d(0.0, 3.0);
  for (int q = 0; q < 100; ++q) {
    double u = d(rng), v = d(rng);
    CHECK(std::abs(s.evaluate(u, v) - tp.eval(u, v)) < 1e-12);
    CHECK(std::abs(s.evaluate(u, v) - 3.0) < 1e-12);
    CHECK(std::abs(sumBasis(s, u, v) - 1.0) < 1e-12);
  }
}

TEST_CASE("meshline insertion preserves the surface") {
  std::mt19937 rng(2);
  TPSurface tp = randomTPSurface(rng, 8, 8, 2);
  LRSurface s = LRSurface::fromTensorProduct(tp);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  int before = s.numBSplines();
  s.insertMeshline({LineDir::ConstU, 0.9375, 0.0, 10.0, 1});  // full-width line
  CHECK(s.numBSplines() >= before + 1);
  for (int q = 0; q < 1000; ++q) {
    double u = d(rng), v = d(rng);
    CHECK(std::abs(s.evaluate(u, v) - tp.eval(u, v)) < 1e-10);
  }
}

TEST_CASE("repeated insertion raises multiplicity") {
  std::mt19937 rng(3);
  TPSurface tp = randomTPSurface(rng, 8, 8, 2);
  LRSurface s = LRSurface::fromTensorProduct(tp);
  Meshline m{LineDir::ConstV, 2.5, 0.0, 10.0, 1};
  s.insertMeshline(m);
  s.insertMeshline(m);
  int mult = 0;
  for (const auto& l : s.meshlines())
    if (l.dir == LineDir::ConstV && l.fixed == 2.5) mult = std::max(mult, l.multiplicity);
  CHECK(mult == 2);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  for (int q = 0; q < 500; ++q) {
    double u = d(rng), v = d(rng);
    CHECK(std::abs(s.evaluate(u, v) - tp.eval(u, v)) < 1e-10);
    CHECK(std::abs(sumBasis(s, u, v) - 1.0) < 1e-10);
  }
}

TEST_CASE("meshline that splits nothing is rejected") {
  std::mt19937 rng(4);
  LRSurface s = LRSurface::fromTensorProduct(randomTPSurface(rng, 8, 8, 2));
  // too short to traverse any support
  CHECK_THROWS_AS(s.insertMeshline({LineDir::ConstU, 3.1, 4.0, 4.5, 1}),
                  std::invalid_argument);
  // zero-length span
  CHECK_THROWS_AS(s.insertMeshline({LineDir::ConstU, 3.1, 4.0, 4.0, 1}),
                  std::invalid_argument);
  // fixed value on the domain boundary
  CHECK_THROWS_AS(s.insertMeshline({LineDir::ConstU, 0.0, 0.0, 10.0, 1}),
                  std::domain_error);
}

TEST_CASE("element structure") {
  std::mt19937 rng(5);
  LRSurface s = LRSurface::fromTensorProduct(randomTPSurface(rng, 8, 8, 2));
  // unrefined bi-quadratic: every element sees exactly 9 B-splines
  for (const auto& el : s.elements()) CHECK(el.bsplines.size() == 9);
  size_t nElems = s.elements().size();
  CHECK(nElems == 36);

  double minAreaBefore = 1e300;
  for (const auto& el : s.elements()) minAreaBefore = std::min(minAreaBefore, el.box.area());

  // a line across half the domain bisects the elements it crosses
  Meshline m{LineDir::ConstU, 0.5 * (0.0 + 10.0 / 6.0), 0.0, 5.0, 1};
  s.insertMeshline(m);
  size_t crossed = 3;  // v spans three elements on [0,5]
  CHECK(s.elements().size() == nElems + crossed);

  double minAreaAfter = 1e300;
  for (const auto& el : s.elements()) minAreaAfter = std::min(minAreaAfter, el.box.area());
  CHECK(minAreaAfter < minAreaBefore);
}

TEST_CASE("element overlap consistency") {
  std::mt19937 rng(6);
  LRSurface s = LRSurface::fromTensorProduct(randomTPSurface(rng, 8, 8, 2));
  for (int i = 0; i < 20; ++i) {
    try {
      s.insertMeshline(randomMeshline(rng, s));
    } catch (const std::invalid_argument&) {
    }
  }
  double lhs = 0;
  for (const auto& el : s.elements()) lhs += el.box.area() * el.bsplines.size();
  double rhs = 0;
  for (int id : s.bsplineIds()) rhs += s.supportOf(id).area();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  // every element's B-splines contain the element box
  for (const auto& el : s.elements())
    for (int id : el.bsplines) CHECK(s.supportOf(id).containsRect(el.box));
}

TEST_CASE("greville points") {
  ScaledTensorBSpline b(LocalKnots{0, 1, 2, 3}, LocalKnots{0, 1, 2, 3});
  auto [gu, gv] = b.greville();
  CHECK(gu == doctest::Approx(1.5));
  CHECK(gv == doctest::Approx(1.5));
  ScaledTensorBSpline c(LocalKnots{0, 0, 0, 1}, LocalKnots{0, 1, 3, 7});
  auto [cu, cv] = c.greville();
  CHECK(cu == doctest::Approx(0.0));
  CHECK(cv == doctest::Approx(2.0));
}

TEST_CASE("partition of unity and geometry preservation under random refinement") {
  std::mt19937 rng(7);
  TPSurface tp = randomTPSurface(rng, 8, 8, 2);
  LRSurface s = LRSurface::fromTensorProduct(tp);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  for (int ins = 0; ins < 50; ++ins) {
    try {
      s.insertMeshline(randomMeshline(rng, s));
    } catch (const std::invalid_argument&) {
      continue;
    }
    for (int q = 0; q < 20; ++q) {
      double u = d(rng), v = d(rng);
      CHECK(std::abs(s.evaluate(u, v) - tp.eval(u, v)) < 1e-10);
    }
  }
  for (int q = 0; q < 1000; ++q) {
    double u = d(rng), v = d(rng);
    CHECK(std::abs(sumBasis(s, u, v) - 1.0) < 1e-10);
  }
  // scales stay positive; heavy overlap forces some scale below one
  int maxOverlap = 0;
  for (const auto& el : s.elements()) maxOverlap = std::max<int>(maxOverlap, el.bsplines.size());
  double minScale = 1.0;
  for (int id : s.bsplineIds()) {
    CHECK(s.scale(id) > 0.0);
    CHECK(s.scale(id) <= 1.0 + 1e-12);
    minScale = std::min(minScale, s.scale(id));
  }
  if (maxOverlap > 9) CHECK(minScale < 1.0);
}

TEST_CASE("minimal support against all mesh lines") {
  std::mt19937 rng(8);
  LRSurface s = LRSurface::fromTensorProduct(randomTPSurface(rng, 8, 8, 2));
  for (int ins = 0; ins < 30; ++ins) {
    try {
      s.insertMeshline(randomMeshline(rng, s));
    } catch (const std::invalid_argument&) {
    }
  }
  auto lines = s.meshlines();
  for (int id : s.bsplineIds()) {
    ScaledTensorBSpline b = s.bspline(id);
    Rect sup = b.support();
    for (const auto& m : lines) {
      bool traverses, crossesInterior;
      if (m.dir == LineDir::ConstU) {
        crossesInterior = m.fixed > sup.umin && m.fixed < sup.umax;
        traverses = m.start <= sup.vmin && m.end >= sup.vmax;
      } else {
        crossesInterior = m.fixed > sup.vmin && m.fixed < sup.vmax;
        traverses = m.start <= sup.umin && m.end >= sup.umax;
      }
      if (!crossesInterior || !traverses) continue;
      const auto& k = m.dir == LineDir::ConstU ? b.uknots.values : b.vknots.values;
      int count = static_cast<int>(std::count(k.begin(), k.end(), m.fixed));
      CHECK(count >= m.multiplicity);
    }
  }
}

TEST_CASE("raw data round trip") {
  std::mt19937 rng(9);
  LRSurface s = LRSurface::fromTensorProduct(randomTPSurface(rng, 6, 7, 2));
  for (int ins = 0; ins < 10; ++ins) {
    try {
      s.insertMeshline(randomMeshline(rng, s));
    } catch (const std::invalid_argument&) {
    }
  }
  LRSurface t = LRSurface::fromData(s.degreeU(), s.degreeV(), s.knotsU(), s.knotsV(),
                                    s.bsplineData());
  CHECK(t.numBSplines() == s.numBSplines());
  std::uniform_real_distribution<double> d(0.0, 10.0);
  for (int q = 0; q < 300; ++q) {
    double u = d(rng), v = d(rng);
    CHECK(std::abs(s.evaluate(u, v) - t.evaluate(u, v)) < 1e-12);
  }
}

TEST_CASE("invalid raw data is rejected") {
  std::mt19937 rng(10);
  LRSurface s = LRSurface::fromTensorProduct(randomTPSurface(rng, 5, 5, 2));
  auto bs = s.bsplineData();
  auto bad = bs;
  bad[0].scale = 0.0;
  CHECK_THROWS_AS(LRSurface::fromData(2, 2, s.knotsU(), s.knotsV(), bad),
                  std::invalid_argument);
  bad = bs;
  bad[0].uidx = {3, 2, 1, 0};
  CHECK_THROWS_AS(LRSurface::fromData(2, 2, s.knotsU(), s.knotsV(), bad),
                  std::invalid_argument);
  bad = bs;
  bad[0].uidx = {0, 1, 2, 99};
  CHECK_THROWS_AS(LRSurface::fromData(2, 2, s.knotsU(), s.knotsV(), bad),
                  std::invalid_argument);
  bad = bs;
  bad[1] = bad[0];
  CHECK_THROWS_AS(LRSurface::fromData(2, 2, s.knotsU(), s.knotsV(), bad),
                  std::invalid_argument);
}
