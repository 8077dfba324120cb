#include "mbvge/bvge.hpp"

#include <algorithm>

namespace mbvge {

std::string_view to_string(Region r) noexcept {
  switch (r) {
    case Region::Diagonal:
      return "diag";
    case Region::Lower:
      return "lower";
    case Region::Upper:
      return "upper";
  }
  return "diag";
}

double bvge_survival(const BVGEParams& c, double t1, double t2) {
  t1 = std::max(t1, 0.0);
  t2 = std::max(t2, 0.0);
  const double l = c.lambda();
  if (t1 <= t2) {
    // A = F(t1; a1 + a3), B = F(t2; a2)
    const GEParams ga{c.alpha1() + c.alpha3(), l};
    const GEParams gb{c.alpha2(), l};
    const double b = ge_cdf(gb, t2);
    return ge_sf(ga, t1) * ge_sf(gb, t2) + b * ge_sf(GEParams{c.alpha3(), l}, t2);
  }
  // A = F(t1; a1), B = F(t2; a2 + a3)
  const GEParams ga{c.alpha1(), l};
  const GEParams gb{c.alpha2() + c.alpha3(), l};
  const double a = ge_cdf(ga, t1);
  return ge_sf(ga, t1) * ge_sf(gb, t2) + a * ge_sf(GEParams{c.alpha3(), l}, t1);
}

BVGEPair bvge_sample(const BVGEParams& c, Rng& rng) {
  const double l = c.lambda();
  const double u1 = ge_sample(GEParams{c.alpha1(), l}, rng);
  const double u2 = ge_sample(GEParams{c.alpha2(), l}, rng);
  const double u3 = ge_sample(GEParams{c.alpha3(), l}, rng);
  const double x1 = std::max(u1, u3);
  const double x2 = std::max(u2, u3);
  if (x1 == x2) return {x1, x2, Region::Diagonal};
  return {x1, x2, x1 < x2 ? Region::Lower : Region::Upper};
}

}  // namespace mbvge
