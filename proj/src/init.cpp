#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "mbvge/em.hpp"

namespace mbvge {

namespace {

struct Cluster {
  std::vector<double> x1, x2;
  std::size_t ties = 0;
};

struct GEFit {
  double alpha;
  double lambda;
};

// Squared coefficient of variation of GE(alpha, 1), decreasing in alpha.
double ge_cv2(double alpha) {
  using boost::math::digamma;
  using boost::math::trigamma;
  const double m = digamma(alpha + 1) - digamma(1.0);
  const double v = trigamma(1.0) - trigamma(alpha + 1);
  return v / (m * m);
}

GEFit ge_moment_fit(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= std::max(n - 1.0, 1.0);
  const double target = var / (mean * mean);

  double alpha = 1.0;
  const double lo = 1e-3;
  const double hi = 1e3;
  if (target >= ge_cv2(lo)) {
    alpha = lo;
  } else if (target <= ge_cv2(hi)) {
    alpha = hi;
  } else {
    boost::uintmax_t iters = 100;
    const auto [a, b] = boost::math::tools::toms748_solve(
        [target](double al) { return ge_cv2(al) - target; }, lo, hi,
        boost::math::tools::eps_tolerance<double>(30), iters);
    alpha = 0.5 * (a + b);
  }
  const double lambda =
      (boost::math::digamma(alpha + 1) - boost::math::digamma(1.0)) / mean;
  return {alpha, lambda};
}

std::optional<BVGEParams> component_from_cluster(const Cluster& c) {
  if (c.x1.size() < 5) return std::nullopt;
  const GEFit f1 = ge_moment_fit(c.x1);
  const GEFit f2 = ge_moment_fit(c.x2);
  const double lambda = 0.5 * (f1.lambda + f2.lambda);
  if (!(std::isfinite(lambda) && lambda > 0)) return std::nullopt;
  // The tie probability is a3 / (a1 + a2 + a3) = a3 / (a13 + a23 - a3).
  const double t = static_cast<double>(c.ties) / static_cast<double>(c.x1.size());
  const double floor = 0.05;
  double a3 = t * (f1.alpha + f2.alpha) / (1.0 + t);
  a3 = std::clamp(a3, floor * std::min(f1.alpha, f2.alpha), std::min(f1.alpha, f2.alpha));
  const double a1 = std::max(f1.alpha - a3, floor);
  const double a2 = std::max(f2.alpha - a3, floor);
  return BVGEParams{a1, a2, std::max(a3, floor), lambda};
}

MixtureParams moment_guess(const DataPartition& part, Rng& rng) {
  const std::vector<BVGEPair> pts = part.pairs();
  const std::size_t n = pts.size();

  // Two-means on (x1, x2), seeded at the quartiles of x1 + x2.
  std::vector<double> total(n);
  for (std::size_t i = 0; i < n; ++i) total[i] = pts[i].x1 + pts[i].x2;
  std::vector<double> sorted = total;
  std::sort(sorted.begin(), sorted.end());
  std::array<std::array<double, 2>, 2> centre{};
  for (int k = 0; k < 2; ++k) {
    const double q = sorted[std::min(n - 1, (k == 0 ? n / 4 : 3 * n / 4))];
    centre[k] = {q / 2, q / 2};
  }
  std::vector<int> label(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      auto d = [&](int k) {
        return std::hypot(pts[i].x1 - centre[k][0], pts[i].x2 - centre[k][1]);
      };
      const int best = d(0) <= d(1) ? 0 : 1;
      changed |= best != label[i];
      label[i] = best;
    }
    std::array<std::array<double, 3>, 2> acc{};
    for (std::size_t i = 0; i < n; ++i) {
      acc[label[i]][0] += pts[i].x1;
      acc[label[i]][1] += pts[i].x2;
      acc[label[i]][2] += 1;
    }
    for (int k = 0; k < 2; ++k) {
      if (acc[k][2] > 0) centre[k] = {acc[k][0] / acc[k][2], acc[k][1] / acc[k][2]};
    }
    if (!changed && iter > 0) break;
  }

  std::array<Cluster, 2> clusters;
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = clusters[label[i]];
    c.x1.push_back(pts[i].x1);
    c.x2.push_back(pts[i].x2);
    c.ties += pts[i].region == Region::Diagonal ? 1 : 0;
  }
  const auto c0 = component_from_cluster(clusters[0]);
  const auto c1 = component_from_cluster(clusters[1]);
  if (!c0 || !c1) return initial_guess(part, InitStrategy::Random, rng);
  const double p = std::clamp(static_cast<double>(clusters[0].x1.size()) / static_cast<double>(n),
                              0.05, 0.95);
  return {p, *c0, *c1};
}

}  // namespace

MixtureParams initial_guess(const DataPartition& part, InitStrategy strategy, Rng& rng) {
  if (strategy == InitStrategy::Moment && part.size() >= 10) return moment_guess(part, rng);
  auto log_uniform = [&rng](double lo, double hi) {
    return std::exp(rng.uniform(std::log(lo), std::log(hi)));
  };
  auto component = [&] {
    const double a1 = log_uniform(0.2, 3.0);
    const double a2 = log_uniform(0.2, 3.0);
    const double a3 = log_uniform(0.2, 3.0);
    return BVGEParams{a1, a2, a3, log_uniform(0.3, 3.0)};
  };
  const double p = rng.uniform(0.2, 0.8);
  const BVGEParams c0 = component();
  const BVGEParams c1 = component();
  return {p, c0, c1};
}

}  // namespace mbvge
