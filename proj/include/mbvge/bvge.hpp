#pragma once

// One bivariate generalized exponential component BVGE(a1, a2, a3, lambda):
// X1 = max(U1, U3), X2 = max(U2, U3) with independent Uk ~ GE(ak, lambda).
// The law has an absolutely continuous part on x1 != x2 and a singular part
// on the diagonal x1 = x2 of total mass a3 / (a1 + a2 + a3).

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string_view>

#include "mbvge/ge.hpp"
#include "mbvge/random.hpp"

namespace mbvge {

template <typename Scalar>
class BasicBVGEParams {
 public:
  BasicBVGEParams(Scalar alpha1, Scalar alpha2, Scalar alpha3, Scalar lambda)
      : alpha1_(alpha1), alpha2_(alpha2), alpha3_(alpha3), lambda_(lambda) {
    using std::isfinite;
    for (Scalar a : {alpha1, alpha2, alpha3}) {
      if (!(isfinite(a) && a > 0)) {
        throw std::invalid_argument("BVGE shape parameters must be positive and finite");
      }
    }
    if (!(isfinite(lambda) && lambda > 0)) {
      throw std::invalid_argument("BVGE rate lambda must be positive and finite");
    }
  }

  Scalar alpha1() const noexcept { return alpha1_; }
  Scalar alpha2() const noexcept { return alpha2_; }
  Scalar alpha3() const noexcept { return alpha3_; }
  Scalar lambda() const noexcept { return lambda_; }
  Scalar alpha_sum() const noexcept { return alpha1_ + alpha2_ + alpha3_; }

  /// Marginal law of X1, GE(a1 + a3, lambda).
  BasicGEParams<Scalar> marginal1() const { return {alpha1_ + alpha3_, lambda_}; }
  /// Marginal law of X2, GE(a2 + a3, lambda).
  BasicGEParams<Scalar> marginal2() const { return {alpha2_ + alpha3_, lambda_}; }

  /// Parameters of (X2, X1): a1 and a2 exchanged.
  BasicBVGEParams swapped() const { return {alpha2_, alpha1_, alpha3_, lambda_}; }

  friend bool operator==(const BasicBVGEParams&, const BasicBVGEParams&) = default;

 private:
  Scalar alpha1_;
  Scalar alpha2_;
  Scalar alpha3_;
  Scalar lambda_;
};

using BVGEParams = BasicBVGEParams<double>;

/// Diagonal is I0 (x1 = x2), Lower is I1 (x1 < x2), Upper is I2 (x1 > x2).
enum class Region { Diagonal, Lower, Upper };

std::string_view to_string(Region r) noexcept;

/// Classify a point. Ties are detected with |x1 - x2| <= tie_tol * max(1, |x1|);
/// tie_tol = 0 means exact equality, which is what the sampler produces.
inline Region classify(double x1, double x2, double tie_tol = 0.0) noexcept {
  const double scale = std::fmax(1.0, std::fabs(x1));
  if (x1 == x2 || std::fabs(x1 - x2) <= tie_tol * scale) return Region::Diagonal;
  return x1 < x2 ? Region::Lower : Region::Upper;
}

struct BVGEPair {
  double x1 = 0;
  double x2 = 0;
  Region region = Region::Diagonal;

  static BVGEPair classified(double x1, double x2, double tie_tol = 0.0) noexcept {
    return {x1, x2, classify(x1, x2, tie_tol)};
  }
};

/// Density value tagged with its reference measure. Diagonal values are
/// densities with respect to length on {x1 = x2} and are never added to
/// planar values.
struct Density {
  Region region;
  double value;
};

/// log of the density of `region` at (x1, x2). For Diagonal only x1 is used.
///   Lower:    f_GE(x1; a1 + a3) f_GE(x2; a2)
///   Upper:    f_GE(x1; a1) f_GE(x2; a2 + a3)
///   Diagonal: a3 / (a1 + a2 + a3) f_GE(x; a1 + a2 + a3)
template <typename Scalar>
Scalar bvge_log_density(const BasicBVGEParams<Scalar>& c, Region region, Scalar x1, Scalar x2) {
  using std::log;
  const Scalar l = c.lambda();
  switch (region) {
    case Region::Lower:
      return ge_log_pdf(BasicGEParams<Scalar>(c.alpha1() + c.alpha3(), l), x1) +
             ge_log_pdf(BasicGEParams<Scalar>(c.alpha2(), l), x2);
    case Region::Upper:
      return ge_log_pdf(BasicGEParams<Scalar>(c.alpha1(), l), x1) +
             ge_log_pdf(BasicGEParams<Scalar>(c.alpha2() + c.alpha3(), l), x2);
    case Region::Diagonal:
    default: {
      const Scalar s = c.alpha_sum();
      return log(c.alpha3() / s) + ge_log_pdf(BasicGEParams<Scalar>(s, l), x1);
    }
  }
}

inline double bvge_log_density(const BVGEParams& c, const BVGEPair& pt) {
  return bvge_log_density(c, pt.region, pt.x1, pt.x2);
}

inline Density bvge_density(const BVGEParams& c, const BVGEPair& pt) {
  return {pt.region, std::exp(bvge_log_density(c, pt))};
}

/// Joint CDF P(X1 <= x1, X2 <= x2) = F(x1; a1) F(x2; a2) F(min(x1, x2); a3).
template <typename Scalar>
Scalar bvge_cdf(const BasicBVGEParams<Scalar>& c, Scalar x1, Scalar x2) {
  using std::exp;
  if (x1 <= 0 || x2 <= 0) return Scalar(0);
  const Scalar l = c.lambda();
  Scalar log_f;
  if (x1 < x2) {
    log_f = ge_log_cdf(BasicGEParams<Scalar>(c.alpha1() + c.alpha3(), l), x1) +
            ge_log_cdf(BasicGEParams<Scalar>(c.alpha2(), l), x2);
  } else if (x1 > x2) {
    log_f = ge_log_cdf(BasicGEParams<Scalar>(c.alpha1(), l), x1) +
            ge_log_cdf(BasicGEParams<Scalar>(c.alpha2() + c.alpha3(), l), x2);
  } else {
    log_f = ge_log_cdf(BasicGEParams<Scalar>(c.alpha_sum(), l), x1);
  }
  return exp(log_f);
}

/// Joint survival P(X1 > t1, X2 > t2). Equal to 1 - F1(t1) - F2(t2) + F(t1, t2),
/// evaluated in the rearranged form (1 - A)(1 - B) + B (1 - c^a3) so that it
/// stays accurate when the survival is small.
double bvge_survival(const BVGEParams& c, double t1, double t2);

/// P(X1 = X2) = a3 / (a1 + a2 + a3).
inline double singular_mass(const BVGEParams& c) noexcept { return c.alpha3() / c.alpha_sum(); }

/// Latent max construction. Returns bit-identical coordinates tagged Diagonal
/// when U3 is the largest of the three.
BVGEPair bvge_sample(const BVGEParams& c, Rng& rng);

}  // namespace mbvge
