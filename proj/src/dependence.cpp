#include "mbvge/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mbvge/quadrature.hpp"

namespace mbvge {

namespace {

constexpr double kSurvivalFloor = 1e-300;

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

McEstimate batch_summary(std::span<const double> per_batch, double estimate) {
  const double m = mean(per_batch);
  double ss = 0.0;
  for (double b : per_batch) ss += (b - m) * (b - m);
  const auto k = static_cast<double>(per_batch.size());
  return {estimate, std::sqrt(ss / (k - 1.0) / k)};
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

void draw_columns(const MixtureParams& params, std::size_t n, Rng& rng, std::vector<double>& x,
                  std::vector<double>& y) {
  const auto draws = mix_sample(params, n, rng);
  x.resize(n);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = draws[i].pair.x1;
    y[i] = draws[i].pair.x2;
  }
}

}  // namespace

CopulaPoint CopulaPoint::checked(double u, double v) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument("copula coordinates must lie in [0,1]");
  }
  return {u, v};
}

double copula_component(const BVGEParams& c, CopulaPoint pt) {
  const double a13 = c.alpha1() + c.alpha3();
  const double a23 = c.alpha2() + c.alpha3();
  if (pt.u <= 0.0 || pt.v <= 0.0) return 0.0;
  // u^(1/a13) and v^(1/a23) are the values of 1 - exp(-lambda x) at the two
  // marginal quantiles, so comparing them compares x1 with x2.
  if (std::pow(pt.u, 1.0 / a13) <= std::pow(pt.v, 1.0 / a23)) {
    return pt.u * std::pow(pt.v, c.alpha2() / a23);
  }
  return std::pow(pt.u, c.alpha1() / a13) * pt.v;
}

double copula_component_printed(const BVGEParams& c, CopulaPoint pt) {
  const double a13 = c.alpha1() + c.alpha3();
  const double a23 = c.alpha2() + c.alpha3();
  if (std::pow(pt.u, 1.0 / a13) <= std::pow(pt.v, 1.0 / a23)) {
    return std::pow(pt.u, c.alpha1() / a13) * pt.v;
  }
  return pt.u * std::pow(pt.v, c.alpha2() / a23);
}

double copula_mixture(const MixtureParams& params, CopulaPoint pt) {
  return params.p() * copula_component(params.comp0(), pt) +
         (1.0 - params.p()) * copula_component(params.comp1(), pt);
}

double copula_of_mixture(const MixtureParams& params, CopulaPoint pt) {
  if (pt.u <= 0.0 || pt.v <= 0.0) return 0.0;
  if (pt.u >= 1.0) return pt.v;
  if (pt.v >= 1.0) return pt.u;
  return mix_cdf(params, marginal_quantile(params, 1, pt.u), marginal_quantile(params, 2, pt.v));
}

double lower_tail_ratio(const MixtureParams& params, double t) {
  return copula_mixture(params, {t, t}) / t;
}

double upper_tail_printed(const MixtureParams& params) noexcept {
  const auto& a = params.comp0();
  const auto& b = params.comp1();
  const double p = params.p();
  return 2.0 - p * a.alpha2() / a.alpha_sum() - (1.0 - p) * b.alpha2() / b.alpha_sum();
}

double upper_tail_numeric(const MixtureParams& params) {
  auto ratio = [&](double h) {
    const double t = 1.0 - h;
    return (1.0 - 2.0 * t + copula_mixture(params, {t, t})) / h;
  };
  // R(h) = limit + O(h); eliminate the linear term between h and h / 10.
  double estimate = 0.0;
  for (int k = 2; k <= 5; ++k) {
    const double h = std::pow(10.0, -k);
    estimate = (10.0 * ratio(h / 10.0) - ratio(h)) / 9.0;
  }
  return estimate;
}

TailIndices tail_indices(const MixtureParams& params) {
  TailIndices out;
  out.lower = 0.0;
  out.lower_ratio = lower_tail_ratio(params, 1e-6);
  out.upper_printed = upper_tail_printed(params);
  out.upper_printed_in_range = out.upper_printed >= 0.0 && out.upper_printed <= 1.0;
  out.upper_raw = upper_tail_numeric(params);
  out.upper_numeric = std::clamp(out.upper_raw, 0.0, 1.0);
  out.upper_numeric_clamped = out.upper_numeric != out.upper_raw;
  return out;
}

HazardValue hazard_ratio(const MixtureParams& params, double t1, double t2) {
  HazardValue out;
  const BVGEPair pt = BVGEPair::classified(t1, t2);
  out.region = pt.region;
  out.survival = mix_survival(params, t1, t2);
  if (!(out.survival > kSurvivalFloor)) {
    out.survival_underflow = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = mix_density(params, pt).value / out.survival;
  return out;
}

HazardGradient hazard_gradient(const MixtureParams& params, double t1, double t2) {
  HazardGradient out;
  const double s = mix_survival(params, t1, t2);
  if (!(s > kSurvivalFloor)) {
    out.survival_underflow = true;
    out.d1 = out.d2 = std::numeric_limits<double>::infinity();
    return out;
  }
  double n1 = 0.0;
  double n2 = 0.0;
  for (int k = 0; k < 2; ++k) {
    const auto& c = params.component(k);
    const double l = c.lambda();
    const GEParams g1{c.alpha1(), l};
    const GEParams g2{c.alpha2(), l};
    const GEParams g13{c.alpha1() + c.alpha3(), l};
    const GEParams g23{c.alpha2() + c.alpha3(), l};
    // -dS/dt1 and -dS/dt2 for this component.
    const double m1 = t1 < t2 ? ge_pdf(g13, t1) * ge_sf(g2, t2)
                              : ge_pdf(g13, t1) - ge_pdf(g1, t1) * ge_cdf(g23, t2);
    const double m2 = t2 < t1 ? ge_pdf(g23, t2) * ge_sf(g1, t1)
                              : ge_pdf(g23, t2) - ge_pdf(g2, t2) * ge_cdf(g13, t1);
    n1 += params.weight(k) * m1;
    n2 += params.weight(k) * m2;
  }
  out.d1 = n1 / s;
  out.d2 = n2 / s;
  return out;
}

ConditionalCdf conditional_cdf(const MixtureParams& params, double x1, double x2) {
  ConditionalCdf out;
  double num = 0.0;
  double den = 0.0;
  double printed_num = 0.0;
  double printed_den = 0.0;
  for (int k = 0; k < 2; ++k) {
    const auto& c = params.component(k);
    const double l = c.lambda();
    const double w = params.weight(k);
    const double a1 = c.alpha1();
    const double a2 = c.alpha2();
    const double a3 = c.alpha3();
    const double a13 = a1 + a3;
    const double a23 = a2 + a3;
    const double sum = c.alpha_sum();

    // P(X1 <= x1, X2 in dx2) / dx2 and the X2 marginal density.
    double joint;
    if (x1 < x2) {
      joint = ge_cdf(GEParams{a13, l}, x1) * ge_pdf(GEParams{a2, l}, x2);
    } else if (x1 > x2) {
      joint = ge_cdf(GEParams{a1, l}, x1) * ge_pdf(GEParams{a23, l}, x2);
    } else {
      // X1 < X2 part plus the diagonal atom: a23 lambda e^(-lambda x) s^(sum - 1).
      joint = ge_cdf(GEParams{a13, l}, x1) * ge_pdf(GEParams{a2, l}, x2) +
              singular_mass(c) * ge_pdf(GEParams{sum, l}, x2);
    }
    num += w * joint;
    den += w * ge_pdf(GEParams{a23, l}, x2);

    // Verbatim constants, each component with its own rate.
    const double s1 = -std::expm1(-l * x1);
    const double s2 = -std::expm1(-l * x2);
    double top;
    if (x1 < x2) {
      top = std::pow(s1, a13) * a2 * std::pow(s2, a2 - 1.0);
    } else if (x1 > x2) {
      top = std::pow(s1, a1) * a23 * std::pow(s2, a23 - 1.0);
    } else {
      top = sum * std::pow(s2, sum - 1.0);
    }
    printed_num += w * top;
    printed_den += w * a23 * std::pow(s2, a23 - 1.0);
  }
  out.value = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
  out.printed = printed_num / printed_den;
  out.printed_in_range = out.printed >= 0.0 && out.printed <= 1.0;
  return out;
}

double kendall_tau_printed(const MixtureParams& params) noexcept {
  const double a1 = params.comp0().alpha1();
  const double a2 = params.comp0().alpha2();
  const double a3 = params.comp0().alpha3();
  const double b1 = params.comp1().alpha1();
  const double b2 = params.comp1().alpha2();
  const double b3 = params.comp1().alpha3();
  const double p = params.p();
  const double q = 1.0 - p;
  const double sa = a1 + a2 + a3;
  const double sb = b1 + b2 + b3;
  return p * p * (a1 + a2) / sa + q * q * (b1 + b2) / sb +
         2 * p * q * b2 * (a2 + a3) / ((2 * b1 + b2 + 2 * b3) * (a2 + a3) + a2 * (b2 + b3)) +
         2 * p * q * a2 * (b2 + b3) / ((2 * a1 + a2 + 2 * a3) * (b2 + b3) + b2 * (a2 + a3)) +
         2 * p * q * b1 * (a1 + a3) / (2 * sb * a1 + (2 * b2 + b1 + b3) * a3) +
         2 * p * q * a1 * (b1 + b3) / (2 * sa * b1 + (2 * a2 + a1 + a3) * b3) - 1.0;
}

double spearman_rho_printed(const MixtureParams& params) noexcept {
  const auto& a = params.comp0();
  const auto& b = params.comp1();
  const double p = params.p();
  return 6 * p * (a.alpha1() + a.alpha2()) / (2 * a.alpha_sum() + a.alpha3()) +
         6 * (1 - p) * (b.alpha1() + b.alpha2()) / (2 * b.alpha_sum() + b.alpha3()) - 3.0;
}

double kendall_tau_numeric(const MixtureParams& params, double abs_tol) {
  const double e = mixture_expectation(
      params, [&](double x1, double x2) { return mix_cdf(params, x1, x2); }, abs_tol / 4.0);
  return std::clamp(4.0 * e - 1.0, -1.0, 1.0);
}

double spearman_rho_numeric(const MixtureParams& params, double abs_tol) {
  const double e = mixture_expectation(
      params,
      [&](double x1, double x2) { return marginal_cdf(params, 1, x1) * marginal_cdf(params, 2, x2); },
      abs_tol / 12.0);
  return std::clamp(12.0 * e - 3.0, -1.0, 1.0);
}

double sample_kendall_tau_a(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("Kendall tau needs two equal-length samples of size >= 2");
  }
  long long score = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = (x[i] - x[j]) * (y[i] - y[j]);
      score += (s > 0) - (s < 0);
    }
  }
  return static_cast<double>(score) / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double sample_spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("Spearman rho needs two equal-length samples of size >= 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

McEstimate kendall_tau_mc(const MixtureParams& params, std::size_t draws, Rng& rng,
                          std::size_t batches) {
  const std::size_t m = draws / batches;
  if (batches < 2 || m < 2) throw std::invalid_argument("need >= 2 batches of >= 2 draws");
  std::vector<double> per_batch;
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t b = 0; b < batches; ++b) {
    draw_columns(params, m, rng, x, y);
    per_batch.push_back(sample_kendall_tau_a(x, y));
  }
  return batch_summary(per_batch, mean(per_batch));
}

McEstimate spearman_rho_mc(const MixtureParams& params, std::size_t draws, Rng& rng,
                           std::size_t batches) {
  const std::size_t m = draws / batches;
  if (batches < 2 || m < 2) throw std::invalid_argument("need >= 2 batches of >= 2 draws");
  std::vector<double> x;
  std::vector<double> y;
  draw_columns(params, m * batches, rng, x, y);
  std::vector<double> per_batch;
  for (std::size_t b = 0; b < batches; ++b) {
    per_batch.push_back(sample_spearman_rho(std::span(x).subspan(b * m, m),
                                            std::span(y).subspan(b * m, m)));
  }
  return batch_summary(per_batch, sample_spearman_rho(x, y));
}

DependenceSummary dependence_summary(const MixtureParams& params) {
  DependenceSummary out;
  out.kendall_verbatim = kendall_tau_printed(params);
  out.kendall_numeric = kendall_tau_numeric(params);
  out.spearman_verbatim = spearman_rho_printed(params);
  out.spearman_numeric = spearman_rho_numeric(params);
  const TailIndices tails = tail_indices(params);
  out.tail_lower = tails.lower;
  out.tail_upper_verbatim = tails.upper_printed;
  out.tail_upper_numeric = tails.upper_numeric;
  out.kendall_verbatim_in_range = std::fabs(out.kendall_verbatim) <= 1.0;
  out.spearman_verbatim_in_range = std::fabs(out.spearman_verbatim) <= 1.0;
  out.tail_upper_verbatim_in_range = tails.upper_printed_in_range;
  return out;
}

}  // namespace mbvge
