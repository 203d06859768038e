#ifndef LRFIT_BSPLINE_HPP
#define LRFIT_BSPLINE_HPP

#include <array>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lrfit {

/// Local knot vector of a single B-spline: p+2 non-decreasing values.
struct LocalKnots {
  std::vector<double> values;

  LocalKnots() = default;
  explicit LocalKnots(std::vector<double> v);
  LocalKnots(std::initializer_list<double> v) : LocalKnots(std::vector<double>(v)) {}

  int degree() const { return static_cast<int>(values.size()) - 2; }
  double front() const { return values.front(); }
  double back() const { return values.back(); }
};

/// Global knot vector with degree; knots may repeat up to p+1 times.
struct GlobalKnotVector {
  std::vector<double> values;
  int degree = 0;

  GlobalKnotVector() = default;
  GlobalKnotVector(std::vector<double> v, int p);

  int numBasis() const { return static_cast<int>(values.size()) - degree - 1; }
  double domainMin() const { return values[degree]; }
  double domainMax() const { return values[numBasis()]; }
  LocalKnots local(int i) const;

  // uniform clamped knot vector on [a,b] with n basis functions
  static GlobalKnotVector uniformClamped(double a, double b, int n, int p);
};

/// Evaluates a B-spline (or a derivative) on its local knot vector.
/// Half-open convention at degree 0; set closedRight to take the limit
/// from the left instead (used at the global domain maximum).
double evalUnivariate(const LocalKnots& knots, int degree, double u, int deriv = 0,
                      bool closedRight = false);

/// Same, on a raw pointer to degree+2 knot values; no validation.
double evalUnivariateRaw(const double* knots, int degree, double u, int deriv = 0,
                         bool closedRight = false);

struct KnotInsertion {
  LocalKnots k1, k2;
  double alpha1 = 0.0, alpha2 = 0.0;
};

/// Boehm single knot insertion into a local knot vector: B = a1*B1 + a2*B2.
KnotInsertion insertKnot(const LocalKnots& knots, int degree, double a);

struct Rect {
  double umin = 0, umax = 0, vmin = 0, vmax = 0;
  double area() const { return (umax - umin) * (vmax - vmin); }
  bool contains(double u, double v) const {
    return u >= umin && u <= umax && v >= vmin && v <= vmax;
  }
  bool containsRect(const Rect& r) const {
    return r.umin >= umin && r.umax <= umax && r.vmin >= vmin && r.vmax <= vmax;
  }
};

/// Tensor product B-spline with a scaling factor and a coefficient.
struct ScaledTensorBSpline {
  LocalKnots uknots, vknots;
  int degreeU = 0, degreeV = 0;
  double scale = 1.0;
  double coef = 0.0;

  ScaledTensorBSpline() = default;
  ScaledTensorBSpline(LocalKnots uk, LocalKnots vk, double s = 1.0, double c = 0.0);

  Rect support() const;
  /// value of N_B = scale * B(u) * B(v), with partial derivative orders
  double eval(double u, double v, int du = 0, int dv = 0,
              bool closedRightU = false, bool closedRightV = false) const;
  std::pair<double, double> greville() const;
};

/// Plain tensor product spline surface, coefficient grid N1 x N2.
struct TPSurface {
  GlobalKnotVector uknots, vknots;
  std::vector<double> coefs;  // coef(i,j) at i + j*N1

  TPSurface() = default;
  TPSurface(GlobalKnotVector uk, GlobalKnotVector vk, std::vector<double> c);

  int n1() const { return uknots.numBasis(); }
  int n2() const { return vknots.numBasis(); }
  double& coef(int i, int j) { return coefs[i + static_cast<size_t>(j) * n1()]; }
  double coef(int i, int j) const { return coefs[i + static_cast<size_t>(j) * n1()]; }

  double eval(double u, double v, int du = 0, int dv = 0) const;

  void insertKnotU(double a);
  void insertKnotV(double a);
  /// split at parameter a (inserted to multiplicity p+1); a strictly inside domain
  std::pair<TPSurface, TPSurface> splitU(double a) const;
  std::pair<TPSurface, TPSurface> splitV(double a) const;

  TPSurface derivativeU() const;
  TPSurface derivativeV() const;

  double coefMin() const;
  double coefMax() const;
};

/// Univariate spline function; serves boundary-curve interrogation.
struct Curve {
  GlobalKnotVector knots;
  std::vector<double> coefs;

  double eval(double u, int deriv = 0) const;
  void insertKnot(double a);
  Curve derivative() const;
  /// all roots in the domain interior, isolated by coefficient-sign recursion
  std::vector<double> roots(double tol) const;
};

/// basis values (and derivatives) of the p+1 B-splines non-zero at u
struct BasisValues {
  int first = 0;               // index of first non-zero basis function
  std::array<double, 8> v{};   // values, length degree+1
};
BasisValues basisValues(const GlobalKnotVector& kv, double u, int deriv = 0);

/// Expansion of B[local] in the minimal-support basis of `target`:
/// B = sum coef[i] * B_i.  Every knot of `local` must occur in `target`.
std::vector<std::pair<int, double>> expandToBasis(const LocalKnots& local, int degree,
                                                  const GlobalKnotVector& target);

}  // namespace lrfit

#endif
