#include "mbvge/quadrature.hpp"

#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace mbvge {

namespace {

constexpr unsigned kMaxDepth = 15;

// x such that 1 - exp(-lambda x) = s.
double coordinate_of(double s, double lambda) {
  if (s >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::log1p(-s) / lambda;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, kMaxDepth,
                                                                        abs_tol, &err);
}

double component_expectation(const BVGEParams& c,
                             const std::function<double(double, double)>& g, double abs_tol) {
  const double l = c.lambda();
  const double a13 = c.alpha1() + c.alpha3();
  const double a23 = c.alpha2() + c.alpha3();
  const double sum = c.alpha_sum();
  const double inner_tol = abs_tol * 0.1;

  // Lower: t1 = s1^(a1+a3), t2 = s2^a2, region t1 < t2^((a1+a3)/a2).
  const double lower = integrate(
      [&](double t2) {
        const double x2 = coordinate_of(std::pow(t2, 1.0 / c.alpha2()), l);
        const double bound = std::pow(t2, a13 / c.alpha2());
        return integrate(
            [&](double t1) { return g(coordinate_of(std::pow(t1, 1.0 / a13), l), x2); }, 0.0,
            bound, inner_tol);
      },
      0.0, 1.0, abs_tol);

  // Upper: t1 = s1^a1, t2 = s2^(a2+a3), region t2 < t1^((a2+a3)/a1).
  const double upper = integrate(
      [&](double t1) {
        const double x1 = coordinate_of(std::pow(t1, 1.0 / c.alpha1()), l);
        const double bound = std::pow(t1, a23 / c.alpha1());
        return integrate(
            [&](double t2) { return g(x1, coordinate_of(std::pow(t2, 1.0 / a23), l)); }, 0.0,
            bound, inner_tol);
      },
      0.0, 1.0, abs_tol);

  // Diagonal: t = s^(a1+a2+a3), mass a3 / sum.
  const double diagonal = integrate(
      [&](double t) {
        const double x = coordinate_of(std::pow(t, 1.0 / sum), l);
        return g(x, x);
      },
      0.0, 1.0, abs_tol);

  return lower + upper + singular_mass(c) * diagonal;
}

double mixture_expectation(const MixtureParams& params,
                           const std::function<double(double, double)>& g, double abs_tol) {
  return params.p() * component_expectation(params.comp0(), g, abs_tol) +
         (1.0 - params.p()) * component_expectation(params.comp1(), g, abs_tol);
}

MassBreakdown component_total_mass(const BVGEParams& c) {
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::tanh_sinh;
  const double tol = 1e-10;
  tanh_sinh<double> inner;
  exp_sinh<double> outer;
  const double inf = std::numeric_limits<double>::infinity();

  auto lower_slice = [&](double x2) {
    if (!(x2 > 0) || !std::isfinite(x2)) return 0.0;
    return inner.integrate(
        [&](double x1) {
          return x1 <= 0 ? 0.0 : std::exp(bvge_log_density(c, Region::Lower, x1, x2));
        },
        0.0, x2, tol);
  };
  auto upper_slice = [&](double x1) {
    if (!(x1 > 0) || !std::isfinite(x1)) return 0.0;
    return inner.integrate(
        [&](double x2) {
          return x2 <= 0 ? 0.0 : std::exp(bvge_log_density(c, Region::Upper, x1, x2));
        },
        0.0, x1, tol);
  };

  MassBreakdown out;
  out.planar = outer.integrate(lower_slice, 0.0, inf, 1e-8) +
               outer.integrate(upper_slice, 0.0, inf, 1e-8);
  out.diagonal = outer.integrate(
      [&](double x) {
        return x <= 0 ? 0.0 : std::exp(bvge_log_density(c, Region::Diagonal, x, x));
      },
      0.0, inf, 1e-10);
  return out;
}

MassBreakdown mixture_total_mass(const MixtureParams& params) {
  const MassBreakdown a = component_total_mass(params.comp0());
  const MassBreakdown b = component_total_mass(params.comp1());
  const double p = params.p();
  return {p * a.planar + (1 - p) * b.planar, p * a.diagonal + (1 - p) * b.diagonal};
}

}  // namespace mbvge
