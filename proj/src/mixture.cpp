#include "mbvge/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

namespace mbvge {

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

GEParams marginal_of(const BVGEParams& c, int coord) {
  return coord == 1 ? c.marginal1() : c.marginal2();
}

}  // namespace

MixtureParams::MixtureParams(double p, BVGEParams comp0, BVGEParams comp1)
    : p_(p), comp0_(comp0), comp1_(comp1) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
}

std::array<double, 9> MixtureParams::to_array() const noexcept {
  return {p_,
          comp0_.alpha1(),
          comp0_.alpha2(),
          comp0_.alpha3(),
          comp0_.lambda(),
          comp1_.alpha1(),
          comp1_.alpha2(),
          comp1_.alpha3(),
          comp1_.lambda()};
}

MixtureParams MixtureParams::from_array(const std::array<double, 9>& v) {
  return {v[0], BVGEParams{v[1], v[2], v[3], v[4]}, BVGEParams{v[5], v[6], v[7], v[8]}};
}

std::vector<LabeledPair> mix_sample(const MixtureParams& params, std::size_t n, Rng& rng) {
  std::vector<LabeledPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = rng.uniform() < params.p() ? 0 : 1;
    out.push_back({bvge_sample(params.component(label), rng), label});
  }
  return out;
}

double mix_log_density(const MixtureParams& params, const BVGEPair& pt) {
  const double l0 = std::log(params.p()) + bvge_log_density(params.comp0(), pt);
  const double l1 = std::log1p(-params.p()) + bvge_log_density(params.comp1(), pt);
  return log_add(l0, l1);
}

Density mix_density(const MixtureParams& params, const BVGEPair& pt) {
  const double f0 = bvge_density(params.comp0(), pt).value;
  const double f1 = bvge_density(params.comp1(), pt).value;
  return {pt.region, params.p() * f0 + (1.0 - params.p()) * f1};
}

double marginal_cdf(const MixtureParams& params, int coord, double x) {
  if (coord != 1 && coord != 2) throw std::invalid_argument("coord must be 1 or 2");
  return params.p() * ge_cdf(marginal_of(params.comp0(), coord), x) +
         (1.0 - params.p()) * ge_cdf(marginal_of(params.comp1(), coord), x);
}

double marginal_pdf(const MixtureParams& params, int coord, double x) {
  if (coord != 1 && coord != 2) throw std::invalid_argument("coord must be 1 or 2");
  return params.p() * ge_pdf(marginal_of(params.comp0(), coord), x) +
         (1.0 - params.p()) * ge_pdf(marginal_of(params.comp1(), coord), x);
}

double marginal_quantile(const MixtureParams& params, int coord, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("marginal quantile requires 0 < q < 1");
  // The mixture quantile lies between the two component quantiles.
  const double a = ge_quantile(marginal_of(params.comp0(), coord), q);
  const double b = ge_quantile(marginal_of(params.comp1(), coord), q);
  double lo = std::min(a, b);
  double hi = std::max(a, b);
  if (lo == hi) return lo;
  auto f = [&](double x) { return marginal_cdf(params, coord, x) - q; };
  boost::uintmax_t max_iter = 200;
  const auto [r0, r1] =
      boost::math::tools::toms748_solve(f, lo, hi, f(lo), f(hi),
                                        boost::math::tools::eps_tolerance<double>(52), max_iter);
  return 0.5 * (r0 + r1);
}

double mix_cdf(const MixtureParams& params, double x1, double x2) {
  return params.p() * bvge_cdf(params.comp0(), x1, x2) +
         (1.0 - params.p()) * bvge_cdf(params.comp1(), x1, x2);
}

double mix_survival(const MixtureParams& params, double t1, double t2) {
  return params.p() * bvge_survival(params.comp0(), t1, t2) +
         (1.0 - params.p()) * bvge_survival(params.comp1(), t1, t2);
}

double mix_loglik(const MixtureParams& params, std::span<const BVGEPair> data) {
  double total = 0.0;
  for (const auto& pt : data) total += mix_log_density(params, pt);
  return total;
}

std::size_t null_points(const MixtureParams& params, std::span<const BVGEPair> data) {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [&](const auto& pt) {
    return mix_log_density(params, pt) == -std::numeric_limits<double>::infinity();
  }));
}

double mix_singular_mass(const MixtureParams& params) noexcept {
  return params.p() * singular_mass(params.comp0()) +
         (1.0 - params.p()) * singular_mass(params.comp1());
}

}  // namespace mbvge
