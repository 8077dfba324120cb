#pragma once

// Univariate generalized exponential distribution GE(alpha, lambda):
//   F(x) = (1 - exp(-lambda x))^alpha,
//   f(x) = alpha lambda exp(-lambda x) (1 - exp(-lambda x))^(alpha - 1).

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mbvge/random.hpp"

namespace mbvge {

/// log(1 - exp(-a)) for a >= 0, accurate at both ends.
template <typename Scalar>
Scalar log1mexp(Scalar a) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  if (a <= Scalar(std::numbers::ln2)) return log(-expm1(-a));
  return log1p(-exp(-a));
}

template <typename Scalar>
class BasicGEParams {
 public:
  BasicGEParams(Scalar alpha, Scalar lambda) : alpha_(alpha), lambda_(lambda) {
    using std::isfinite;
    if (!(isfinite(alpha) && alpha > 0)) {
      throw std::invalid_argument("GE shape alpha must be positive and finite");
    }
    if (!(isfinite(lambda) && lambda > 0)) {
      throw std::invalid_argument("GE rate lambda must be positive and finite");
    }
  }

  Scalar alpha() const noexcept { return alpha_; }
  Scalar lambda() const noexcept { return lambda_; }

  friend bool operator==(const BasicGEParams&, const BasicGEParams&) = default;

 private:
  Scalar alpha_;
  Scalar lambda_;
};

using GEParams = BasicGEParams<double>;

/// log f(x). Returns -inf for x < 0. At x = 0 the value is +inf, log(alpha
/// lambda) or -inf depending on whether alpha is below, at or above one.
template <typename Scalar>
Scalar ge_log_pdf(const BasicGEParams<Scalar>& g, Scalar x) {
  using std::log;
  const Scalar a = g.alpha();
  const Scalar l = g.lambda();
  if (x < 0) return -std::numeric_limits<Scalar>::infinity();
  if (x == 0) {
    if (a < 1) return std::numeric_limits<Scalar>::infinity();
    if (a > 1) return -std::numeric_limits<Scalar>::infinity();
    return log(a * l);
  }
  return log(a) + log(l) - l * x + (a - 1) * log1mexp(l * x);
}

template <typename Scalar>
Scalar ge_pdf(const BasicGEParams<Scalar>& g, Scalar x) {
  using std::exp;
  return exp(ge_log_pdf(g, x));
}

/// log F(x); -inf for x <= 0.
template <typename Scalar>
Scalar ge_log_cdf(const BasicGEParams<Scalar>& g, Scalar x) {
  if (x <= 0) return -std::numeric_limits<Scalar>::infinity();
  return g.alpha() * log1mexp(g.lambda() * x);
}

template <typename Scalar>
Scalar ge_cdf(const BasicGEParams<Scalar>& g, Scalar x) {
  using std::exp;
  using std::expm1;
  if (x <= 0) return Scalar(0);
  if (g.alpha() == 1) return -expm1(-g.lambda() * x);
  return exp(ge_log_cdf(g, x));
}

/// 1 - F(x), without cancellation in the upper tail.
template <typename Scalar>
Scalar ge_sf(const BasicGEParams<Scalar>& g, Scalar x) {
  using std::expm1;
  if (x <= 0) return Scalar(1);
  return -expm1(ge_log_cdf(g, x));
}

/// Inverse CDF: x = -log(1 - q^(1/alpha)) / lambda. Throws std::domain_error
/// unless 0 < q < 1.
template <typename Scalar>
Scalar ge_quantile(const BasicGEParams<Scalar>& g, Scalar q) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  if (!(q > 0 && q < 1)) {
    throw std::domain_error("GE quantile requires 0 < q < 1");
  }
  // 1 - q^(1/alpha) = -expm1(log(q) / alpha)
  return -log(-expm1(log(q) / g.alpha())) / g.lambda();
}

inline double ge_sample(const GEParams& g, Rng& rng) { return ge_quantile(g, rng.uniform()); }

}  // namespace mbvge
