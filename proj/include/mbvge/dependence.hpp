#pragma once

// Copulas, tail indices, hazards, conditional CDF and rank correlations of the
// BVGE mixture.
//
// Closed forms whose printed versions fail basic range checks (upper tail
// index, Kendall's tau, Spearman's rho) are provided as *_printed functions and
// are always accompanied by an independent numeric value. The numeric values
// describe the joint law of (X1, X2) itself.

#include <cstddef>
#include <span>

#include "mbvge/bvge.hpp"
#include "mbvge/mixture.hpp"
#include "mbvge/random.hpp"

namespace mbvge {

struct CopulaPoint {
  double u;
  double v;

  /// Throws std::invalid_argument unless both coordinates lie in [0, 1].
  static CopulaPoint checked(double u, double v);
};

/// Copula of one component:
///   u v^(a2 / (a2 + a3))   when u^(1 / (a1 + a3)) <= v^(1 / (a2 + a3)),
///   u^(a1 / (a1 + a3)) v   otherwise.
/// Agrees with bvge_cdf evaluated at the marginal quantiles.
double copula_component(const BVGEParams& c, CopulaPoint pt);

/// The same two expressions with the branch conditions swapped. Kept for
/// regression only; it violates C(u, 1) = u.
double copula_component_printed(const BVGEParams& c, CopulaPoint pt);

/// p C_comp0 + (1 - p) C_comp1: the mixture of the component copulas.
double copula_mixture(const MixtureParams& params, CopulaPoint pt);

/// The copula of the mixture law, H(F1^-1(u), F2^-1(v)) with the mixture
/// marginals. Differs from copula_mixture when the components'
/// marginals differ.
double copula_of_mixture(const MixtureParams& params, CopulaPoint pt);

struct TailIndices {
  double lower = 0;           // limit of C(t, t) / t as t -> 0
  double lower_ratio = 0;     // C(t, t) / t at t = 1e-6
  double upper_printed = 0;   // 2 - p a2 / sum(a) - (1 - p) b2 / sum(b), unverified
  double upper_numeric = 0;   // extrapolated limit, clamped to [0, 1]
  double upper_raw = 0;       // extrapolated limit before clamping
  bool upper_printed_in_range = false;
  bool upper_numeric_clamped = false;
};

/// Tail indices of copula_mixture.
TailIndices tail_indices(const MixtureParams& params);

/// C(t, t) / t of copula_mixture.
double lower_tail_ratio(const MixtureParams& params, double t);

/// (1 - 2t + C(t, t)) / (1 - t) of copula_mixture, with one Richardson step
/// over t = 1 - 10^-k, k = 2..6.
double upper_tail_numeric(const MixtureParams& params);

double upper_tail_printed(const MixtureParams& params) noexcept;

struct HazardValue {
  Region region = Region::Diagonal;
  double value = 0;
  double survival = 0;
  bool survival_underflow = false;  // value is meaningless when set
};

/// f(t1, t2) / S(t1, t2) with f taken in the region channel of (t1, t2).
HazardValue hazard_ratio(const MixtureParams& params, double t1, double t2);

struct HazardGradient {
  double d1 = 0;  // -d/dt1 log S
  double d2 = 0;  // -d/dt2 log S
  bool survival_underflow = false;
};

/// Analytic [-d/dt1 log S, -d/dt2 log S]. On the diagonal each entry is the
/// right derivative in its own coordinate.
HazardGradient hazard_gradient(const MixtureParams& params, double t1, double t2);

struct ConditionalCdf {
  double value = 0;    // P(X1 <= x1 | X2 = x2) from the joint law
  double printed = 0;  // printed constants, each component with its own rate
  bool printed_in_range = true;
};

ConditionalCdf conditional_cdf(const MixtureParams& params, double x1, double x2);

struct McEstimate {
  double estimate = 0;
  double std_error = 0;
};

double kendall_tau_printed(const MixtureParams& params) noexcept;
double spearman_rho_printed(const MixtureParams& params) noexcept;

/// 4 E[H(X1, X2)] - 1 by quadrature, H the mixture joint CDF.
double kendall_tau_numeric(const MixtureParams& params, double abs_tol = 1e-6);
/// 12 E[F1(X1) F2(X2)] - 3 by quadrature, F1, F2 the mixture marginals.
double spearman_rho_numeric(const MixtureParams& params, double abs_tol = 1e-6);

/// Sample Kendall tau-a: pairs tied in either coordinate count zero.
double sample_kendall_tau_a(std::span<const double> x, std::span<const double> y);
/// Sample Spearman correlation using average ranks.
double sample_spearman_rho(std::span<const double> x, std::span<const double> y);

/// Monte Carlo estimates from `draws` mixture samples. The estimate for tau is
/// the mean of tau-a over `batches` equal batches; for rho it is the
/// full-sample Spearman correlation. Standard errors are batch-means.
McEstimate kendall_tau_mc(const MixtureParams& params, std::size_t draws, Rng& rng,
                          std::size_t batches = 100);
McEstimate spearman_rho_mc(const MixtureParams& params, std::size_t draws, Rng& rng,
                           std::size_t batches = 100);

struct DependenceSummary {
  double kendall_verbatim = 0;
  double kendall_numeric = 0;
  double spearman_verbatim = 0;
  double spearman_numeric = 0;
  double tail_lower = 0;
  double tail_upper_verbatim = 0;
  double tail_upper_numeric = 0;
  // The printed expressions are verbatim and unverified; these record whether
  // each lands in its mathematical range.
  bool kendall_verbatim_in_range = false;
  bool spearman_verbatim_in_range = false;
  bool tail_upper_verbatim_in_range = false;
};

DependenceSummary dependence_summary(const MixtureParams& params);

}  // namespace mbvge
