#pragma once

// Hierarchical EM for the two-component BVGE mixture.
//
// Stage one treats the component label of each observation as missing and
// computes responsibilities. Stage two treats the identity of the maximum in
// X1 = max(U1, U3), X2 = max(U2, U3) as missing; its conditional law given the
// observed region does not depend on the data and is carried by the
// fractional masses u = (a1, a3) / (a1 + a3) and w = (a2, a3) / (a2 + a3).
// The M-step maximizes the resulting pseudo log likelihood: closed-form
// shapes for a given rate, and the rate from the fixed point g(lambda) = lambda.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mbvge/bvge.hpp"
#include "mbvge/mixture.hpp"
#include "mbvge/random.hpp"

namespace mbvge {

/// Raised when the data cannot identify the model, e.g. every point is a tie.
class ModelInadequacyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observations split by region. Diagonal points keep a single value y with
/// y = x1 = x2; the original row index of every point is retained.
struct DataPartition {
  Eigen::ArrayXd diag_y;
  std::vector<std::size_t> diag_index;
  Eigen::ArrayXd lower_x1;
  Eigen::ArrayXd lower_x2;
  std::vector<std::size_t> lower_index;
  Eigen::ArrayXd upper_x1;
  Eigen::ArrayXd upper_x2;
  std::vector<std::size_t> upper_index;

  Eigen::Index n0() const noexcept { return diag_y.size(); }
  Eigen::Index n1() const noexcept { return lower_x1.size(); }
  Eigen::Index n2() const noexcept { return upper_x1.size(); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n0() + n1() + n2()); }

  /// Classified pairs in original row order.
  std::vector<BVGEPair> pairs() const;
};

struct Point2 {
  double x1;
  double x2;
};

/// Throws std::invalid_argument naming the first offending row (0-based) for
/// non-finite or non-positive coordinates, and for empty input.
DataPartition partition_data(std::span<const Point2> pairs, double tie_tol = 0.0);
DataPartition partition_data(std::span<const LabeledPair> pairs);

/// Responsibilities of comp0 per region; comp1 holds the complements.
struct Posteriors {
  Eigen::ArrayXd diag0, lower0, upper0;
  Eigen::ArrayXd diag1, lower1, upper1;
  /// Points where both component densities vanished; their responsibility is 0.5.
  std::size_t degenerate_points = 0;

  const Eigen::ArrayXd& weights(int component, Region region) const noexcept;
  /// Posteriors with every responsibility of `component` pinned to one.
  static Posteriors pinned(const DataPartition& part, int component);
};

/// Conditional probabilities of the latent maximum given the region.
struct ComponentMasses {
  double u1;  // a1 / (a1 + a3): U1 is the max in X1 on I1
  double u2;  // a3 / (a1 + a3)
  double w1;  // a2 / (a2 + a3): U2 is the max in X2 on I2
  double w2;  // a3 / (a2 + a3)

  static ComponentMasses from(const BVGEParams& c) noexcept;
};

struct FractionalMasses {
  ComponentMasses comp0;  // u01, u02, w01, w02
  ComponentMasses comp1;  // u11, u12, w11, w12

  const ComponentMasses& of(int component) const noexcept { return component == 0 ? comp0 : comp1; }
  static FractionalMasses from(const MixtureParams& params) noexcept;
};

struct EStep {
  Posteriors posteriors;
  FractionalMasses masses;
  double loglik = 0;  // observed-data log likelihood at the parameters used
};

EStep e_step(const MixtureParams& params, const DataPartition& part);

/// Mean responsibility of comp0.
double m_step_weight(const Posteriors& post, std::size_t n);

using Shapes = std::array<double, 3>;

struct ShapeUpdate {
  Shapes shapes{};
  /// Denominators: A, B, D for comp0 and G, H, K for comp1.
  std::array<double, 3> denominators{};
  std::array<double, 3> numerators{};
  /// Set where the update was degenerate and the previous value was kept.
  std::array<bool, 3> degenerate{};
};

/// Closed-form shape maximizers for a fixed rate.
ShapeUpdate m_step_shapes(const Posteriors& post, const FractionalMasses& masses,
                          const DataPartition& part, double lambda, int component,
                          const Shapes& previous);

enum class InitStrategy { Random, Moment };

std::string_view to_string(InitStrategy s) noexcept;
std::optional<InitStrategy> parse_init_strategy(std::string_view s) noexcept;

struct EMConfig {
  double rel_tol = 1e-8;
  int max_iter = 5000;
  double fp_tol = 1e-9;
  int fp_max_iter = 200;
  double fp_damping = 1.0;
  InitStrategy init = InitStrategy::Random;
  double tie_tol = 0.0;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct RateSolution {
  double rate = 0;
  double residual = 0;  // g(rate) - rate
  int iterations = 0;
  bool converged = false;
  bool used_fallback = false;  // bracketing solve after escape or stall
};

/// g(lambda) = E / F for fixed shapes.
double rate_map(const Posteriors& post, const FractionalMasses& masses, const DataPartition& part,
                const Shapes& shapes, double lambda, int component);

/// Damped iteration lambda <- (1 - d) lambda + d g(lambda) with shapes held
/// fixed. The damping is halved whenever successive residuals alternate in
/// sign; a bracketing solve takes over if the iterate leaves (0, inf) or the
/// cap is reached.
RateSolution lambda_fixed_point(const Posteriors& post, const FractionalMasses& masses,
                                const DataPartition& part, const Shapes& shapes,
                                double initial, int component, const EMConfig& cfg);

/// Same iteration with the shapes re-profiled at every lambda, i.e. the
/// stationarity condition of lambda -> pseudo loglik(shapes(lambda), lambda).
/// This is the rate update used by em_fit.
RateSolution lambda_profile_fixed_point(const Posteriors& post, const FractionalMasses& masses,
                                        const DataPartition& part, double initial,
                                        int component, const EMConfig& cfg,
                                        const Shapes& previous);

/// Generic solver shared by the two rate updates. `map` returns g(lambda),
/// possibly non-finite; `score` returns E - lambda F(lambda).
RateSolution solve_rate(const std::function<double(double)>& map,
                        const std::function<double(double)>& score, double initial,
                        const EMConfig& cfg);

/// Expected complete-data log likelihood (both parts plus the weight term).
double pseudo_loglik(const MixtureParams& params, const Posteriors& post,
                     const FractionalMasses& masses, const DataPartition& part);

/// Pseudo log likelihood contribution of a single component, with explicit
/// shapes and rate so that it can be differentiated numerically.
double component_pseudo_loglik(const Posteriors& post, const FractionalMasses& masses,
                               const DataPartition& part, const Shapes& shapes, double lambda,
                               int component);

/// One EM update of a single (non-mixture) BVGE. Kept as a separate code path
/// so that the mixture updates can be checked against it.
BVGEParams bvge_em_update(const BVGEParams& current, const DataPartition& part,
                          const EMConfig& cfg);

enum class StopReason { Tolerance, IterationCap };

std::string_view to_string(StopReason r) noexcept;

struct FitResult {
  MixtureParams params;
  std::vector<double> loglik_trace;  // entry 0 is the initial value
  int iterations = 0;
  bool converged = false;
  StopReason stop_reason = StopReason::IterationCap;
  /// Both fitted components agree to 1e-6 relative; p is then unidentifiable.
  bool components_coincide = false;
  /// Largest decrease of the observed log likelihood between iterations.
  double max_loglik_decrease = 0;
  std::size_t degenerate_shape_updates = 0;
  std::size_t rate_fallbacks = 0;
  std::size_t rate_failures = 0;
  std::size_t degenerate_points = 0;
  /// Iterations in which a component's update was rejected because it did not
  /// improve the pseudo log likelihood.
  std::size_t rejected_updates = 0;
};

/// Initial parameters for em_fit.
///   Random: shapes log-uniform on [0.2, 3], rates log-uniform on [0.3, 3],
///           p uniform on [0.2, 0.8].
///   Moment: two-means clustering on (x1, x2), then per-cluster moment matching
///           of the GE marginals and of the tie fraction.
MixtureParams initial_guess(const DataPartition& part, InitStrategy strategy, Rng& rng);

/// Runs EM from `init`. Throws ModelInadequacyError when n1 = n2 = 0 and
/// std::invalid_argument for fewer than two observations.
FitResult em_fit(const DataPartition& part, const EMConfig& cfg, const MixtureParams& init);

/// Runs EM from the configured initialization strategy seeded by cfg.seed.
FitResult em_fit(const DataPartition& part, const EMConfig& cfg);

}  // namespace mbvge
