#pragma once

// Two-component mixture p BVGE(alpha, lambda1) + (1 - p) BVGE(beta, lambda2).
// comp0 carries (alpha, lambda1) and weight p; comp1 carries (beta, lambda2).

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mbvge/bvge.hpp"
#include "mbvge/random.hpp"

namespace mbvge {

class MixtureParams {
 public:
  /// Throws std::invalid_argument("p must lie in (0,1)") for p outside (0, 1).
  MixtureParams(double p, BVGEParams comp0, BVGEParams comp1);

  double p() const noexcept { return p_; }
  const BVGEParams& comp0() const noexcept { return comp0_; }
  const BVGEParams& comp1() const noexcept { return comp1_; }
  const BVGEParams& component(int k) const noexcept { return k == 0 ? comp0_ : comp1_; }
  double weight(int k) const noexcept { return k == 0 ? p_ : 1.0 - p_; }

  /// (p, a1, a2, a3, l1, b1, b2, b3, l2), the order used in reports.
  std::array<double, 9> to_array() const noexcept;
  static MixtureParams from_array(const std::array<double, 9>& v);

  /// Components exchanged and p replaced by 1 - p; the same distribution.
  MixtureParams swapped() const { return {1.0 - p_, comp1_, comp0_}; }

  friend bool operator==(const MixtureParams&, const MixtureParams&) = default;

 private:
  double p_;
  BVGEParams comp0_;
  BVGEParams comp1_;
};

inline constexpr std::array<const char*, 9> kParameterNames = {"p",  "alpha1", "alpha2",
                                                               "alpha3", "lambda1", "beta1",
                                                               "beta2", "beta3", "lambda2"};

struct LabeledPair {
  BVGEPair pair;
  int label = 0;  // 0 for comp0, 1 for comp1
};

std::vector<LabeledPair> mix_sample(const MixtureParams& params, std::size_t n, Rng& rng);

/// p f_comp0 + (1 - p) f_comp1 in the pair's region channel.
Density mix_density(const MixtureParams& params, const BVGEPair& pt);

/// log of mix_density via log-sum-exp of the weighted component log densities.
double mix_log_density(const MixtureParams& params, const BVGEPair& pt);

/// Mixture marginal: p GE(a1 + a3, l1) + (1 - p) GE(b1 + b3, l2) for coord 1,
/// and the (a2 + a3), (b2 + b3) analogue for coord 2.
double marginal_cdf(const MixtureParams& params, int coord, double x);
double marginal_pdf(const MixtureParams& params, int coord, double x);
/// Inverse of marginal_cdf by bracketed root finding.
double marginal_quantile(const MixtureParams& params, int coord, double q);

double mix_cdf(const MixtureParams& params, double x1, double x2);
double mix_survival(const MixtureParams& params, double t1, double t2);

/// Observed-data log likelihood. -inf when some point has zero density under
/// both components; `null_points` counts such points.
double mix_loglik(const MixtureParams& params, std::span<const BVGEPair> data);
std::size_t null_points(const MixtureParams& params, std::span<const BVGEPair> data);

double mix_singular_mass(const MixtureParams& params) noexcept;

}  // namespace mbvge
