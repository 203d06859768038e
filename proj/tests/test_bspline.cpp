#include <doctest.h>

#include <random>

#include "lrfit/bspline.hpp"
#include "test_util.hpp"

using namespace lrfit;

TEST_CASE("univariate evaluation on local knot vectors") {
  CHECK(evalUnivariate(LocalKnots{0, 1, 2, 3}, 2, 1.5) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(evalUnivariate(LocalKnots{0, 1, 2, 3}, 2, 3.5) == 0.0);
  CHECK(evalUnivariate(LocalKnots{0, 0, 0, 1}, 2, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  // half-open pieces: value at the support end is zero unless closed right
  CHECK(evalUnivariate(LocalKnots{0, 1, 2, 3}, 2, 3.0) == 0.0);
  CHECK(evalUnivariate(LocalKnots{0, 1, 2, 3}, 2, 3.0, 0, true) == 0.0);
  CHECK(evalUnivariate(LocalKnots{0, 1, 1}, 1, 1.0, 0, true) == doctest::Approx(1.0));
}

TEST_CASE("invalid local knot vectors are rejected") {
  CHECK_THROWS_AS(LocalKnots({3, 2, 1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(LocalKnots({1, 1, 1, 1}), std::invalid_argument);
}

TEST_CASE("tensor product B-spline evaluation") {
  ScaledTensorBSpline b(LocalKnots{0, 1, 2, 3}, LocalKnots{0, 1, 2, 3});
  CHECK(b.eval(1.5, 1.5) == doctest::Approx(0.5625).epsilon(1e-14));
  CHECK(b.eval(5.0, 1.5) == 0.0);
  CHECK(b.eval(-0.1, 1.5) == 0.0);
  ScaledTensorBSpline h(LocalKnots{0, 1, 2, 3}, LocalKnots{0, 1, 2, 3}, 0.5);
  CHECK(h.eval(1.5, 1.5) == doctest::Approx(0.28125).epsilon(1e-14));
}

TEST_CASE("support rectangles") {
  ScaledTensorBSpline b(LocalKnots{0, 1, 2, 3}, LocalKnots{2, 3, 4, 5});
  Rect r = b.support();
  CHECK(r.umin == 0);
  CHECK(r.umax == 3);
  CHECK(r.vmin == 2);
  CHECK(r.vmax == 5);
  ScaledTensorBSpline c(LocalKnots{0, 0, 0, 1}, LocalKnots{0, 0, 0, 1});
  CHECK(c.support().umax == 1);
  CHECK_THROWS_AS(ScaledTensorBSpline(LocalKnots{0, 1, 2, 3}, LocalKnots({1, 1, 1, 1})),
                  std::invalid_argument);
}

TEST_CASE("single knot insertion") {
  auto r = insertKnot(LocalKnots{0, 1, 2, 3}, 2, 1.5);
  CHECK(r.alpha1 == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r.alpha2 == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r.k1.values == std::vector<double>{0, 1, 1.5, 2});
  CHECK(r.k2.values == std::vector<double>{1, 1.5, 2, 3});

  auto m = insertKnot(LocalKnots{0, 1, 2, 3}, 2, 2.0);
  CHECK(m.alpha1 == doctest::Approx(1.0));
  CHECK(m.alpha2 == doctest::Approx(0.5));

  auto s = insertKnot(LocalKnots{0, 0, 1}, 1, 0.5);
  CHECK(s.alpha1 == doctest::Approx(1.0));
  CHECK(s.alpha2 == doctest::Approx(0.5));
  CHECK(s.k1.values == std::vector<double>{0, 0, 0.5});
  CHECK(s.k2.values == std::vector<double>{0, 0.5, 1});

  CHECK_THROWS_AS(insertKnot(LocalKnots{0, 1, 2, 3}, 2, 0.0), std::domain_error);
  CHECK_THROWS_AS(insertKnot(LocalKnots{0, 1, 2, 3}, 2, 3.5), std::domain_error);
}

TEST_CASE("knot insertion identity over random triples") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    int p = 1 + trial % 3;
    std::vector<double> k(p + 2);
    k[0] = d(rng);
    for (int i = 1; i <= p + 1; ++i) k[i] = k[i - 1] + 0.05 + d(rng);
    LocalKnots knots(k);
    double a = k.front() + (k.back() - k.front()) * (0.05 + 0.9 * d(rng));
    auto r = insertKnot(knots, p, a);
    for (int q = 0; q < 10; ++q) {
      double u = k.front() + (k.back() - k.front()) * d(rng);
      double lhs = evalUnivariate(knots, p, u);
      double rhs = r.alpha1 * evalUnivariate(r.k1, p, u) +
                   r.alpha2 * evalUnivariate(r.k2, p, u);
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }
  }
}

TEST_CASE("global basis partition of unity") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int p : {1, 2, 3}) {
    auto kv = GlobalKnotVector::uniformClamped(0.0, 10.0, 6 + p, p);
    for (int q = 0; q < 1000; ++q) {
      double u = 10.0 * d(rng);
      double sum = 0;
      for (int i = 0; i < kv.numBasis(); ++i) sum += evalUnivariate(kv.local(i), p, u);
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("derivatives match central finite differences") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  LocalKnots knots{0, 0.8, 2.1, 3, 4.5};
  for (int q = 0; q < 200; ++q) {
    double u = 0.1 + 4.3 * d(rng);
    bool nearKnot = false;
    for (double k : knots.values)
      if (std::abs(u - k) < 1e-3) nearKnot = true;
    if (nearKnot) continue;
    double h = 1e-6;
    double fd = (evalUnivariate(knots, 3, u + h) - evalUnivariate(knots, 3, u - h)) / (2 * h);
    double an = evalUnivariate(knots, 3, u, 1);
    CHECK(an == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("tensor product surface evaluation") {
  auto ku = GlobalKnotVector::uniformClamped(0, 4, 6, 2);
  auto kv = GlobalKnotVector::uniformClamped(0, 4, 6, 2);
  TPSurface s(ku, kv, std::vector<double>(36, 7.0));
  CHECK(s.eval(1.3, 2.7) == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(s.eval(4.0, 4.0) == doctest::Approx(7.0).epsilon(1e-14));
  CHECK_THROWS_AS(s.eval(-0.5, 1.0), std::domain_error);

  TPSurface bil(GlobalKnotVector({0, 0, 1, 1}, 1), GlobalKnotVector({0, 0, 1, 1}, 1),
                {0, 1, 1, 2});
  CHECK(bil.eval(0.5, 0.5) == doctest::Approx(1.0).epsilon(1e-14));

  // linear precision: degree-1 coefficients from f(x,y)=x at Greville abscissae
  auto k1 = GlobalKnotVector::uniformClamped(0, 5, 7, 1);
  std::vector<double> c;
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 7; ++i) c.push_back(k1.values[i + 1]);
  TPSurface lin(k1, k1, c);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(0.0, 5.0);
  for (int q = 0; q < 100; ++q) {
    double u = d(rng), v = d(rng);
    CHECK(std::abs(lin.eval(u, v) - u) < 1e-12);
  }
}

TEST_CASE("TP surface knot insertion and splitting preserve geometry") {
  std::mt19937 rng(5);
  TPSurface s = testutil::randomTPSurface(rng, 7, 6, 2);
  TPSurface t = s;
  t.insertKnotU(3.7);
  t.insertKnotV(1.1);
  auto [left, right] = t.splitU(5.0);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  for (int q = 0; q < 200; ++q) {
    double u = d(rng), v = d(rng);
    CHECK(std::abs(s.eval(u, v) - t.eval(u, v)) < 1e-12);
    const TPSurface& owner = u < 5.0 ? left : right;
    CHECK(std::abs(s.eval(u, v) - owner.eval(u, v)) < 1e-10);
  }
}

TEST_CASE("curve root isolation") {
  // f(u) = (u-1)(u-3) scaled into a quadratic spline on [0,4]
  Curve c;
  c.knots = GlobalKnotVector({0, 0, 0, 4, 4, 4}, 2);
  // Bezier coefficients of (u-1)(u-3) on [0,4]: f(0)=3, f(4)=3, middle = f(0)+2*f'(0)
  c.coefs = {3, -5, 3};
  auto r = c.roots(1e-10);
  REQUIRE(r.size() == 2);
  CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r[1] == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("expansion into a refined basis reproduces the B-spline") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  LocalKnots local{1, 2, 4, 5};
  GlobalKnotVector target({0, 0, 0, 1, 2, 3, 3.5, 4, 5, 6, 6, 6}, 2);
  auto terms = expandToBasis(local, 2, target);
  for (int q = 0; q < 200; ++q) {
    double u = 6.0 * d(rng);
    double want = evalUnivariate(local, 2, u);
    double got = 0;
    for (auto [i, c] : terms) got += c * evalUnivariate(target.local(i), 2, u);
    CHECK(std::abs(want - got) < 1e-12);
  }
}
