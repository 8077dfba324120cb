#include "mbvge/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/tools/roots.hpp>

namespace mbvge {

namespace {

constexpr double kResponsibilityFloor = 1e-300;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Regional data and weights of one component, with the rate-independent sums.
struct WeightedRegions {
  const DataPartition& part;
  const Eigen::ArrayXd& wd;
  const Eigen::ArrayXd& wl;
  const Eigen::ArrayXd& wu;
  double sum_wd, sum_wl, sum_wu;
  double sum_d_y, sum_l_x1, sum_l_x2, sum_u_x1, sum_u_x2;

  WeightedRegions(const Posteriors& post, const DataPartition& p, int component)
      : part(p),
        wd(post.weights(component, Region::Diagonal)),
        wl(post.weights(component, Region::Lower)),
        wu(post.weights(component, Region::Upper)),
        sum_wd(wd.sum()),
        sum_wl(wl.sum()),
        sum_wu(wu.sum()),
        sum_d_y((wd * p.diag_y).sum()),
        sum_l_x1((wl * p.lower_x1).sum()),
        sum_l_x2((wl * p.lower_x2).sum()),
        sum_u_x1((wu * p.upper_x1).sum()),
        sum_u_x2((wu * p.upper_x2).sum()) {}
};

// Rate-dependent weighted sums: sum w log(1 - e^{-lambda x}) and
// sum w x e^{-lambda x} / (1 - e^{-lambda x}) per region and coordinate.
struct RateTerms {
  double log_d, log_l1, log_l2, log_u1, log_u2;
  double xr_d, xr_l1, xr_l2, xr_u1, xr_u2;
};

double weighted_log_s(const Eigen::ArrayXd& w, const Eigen::ArrayXd& x, double lambda) {
  return (w * x.unaryExpr([lambda](double v) { return log1mexp(lambda * v); })).sum();
}

double weighted_xr(const Eigen::ArrayXd& w, const Eigen::ArrayXd& x, double lambda) {
  return (w * x.unaryExpr([lambda](double v) { return v / std::expm1(lambda * v); })).sum();
}

RateTerms rate_terms(const WeightedRegions& d, double lambda) {
  const auto& p = d.part;
  return {weighted_log_s(d.wd, p.diag_y, lambda),   weighted_log_s(d.wl, p.lower_x1, lambda),
          weighted_log_s(d.wl, p.lower_x2, lambda), weighted_log_s(d.wu, p.upper_x1, lambda),
          weighted_log_s(d.wu, p.upper_x2, lambda), weighted_xr(d.wd, p.diag_y, lambda),
          weighted_xr(d.wl, p.lower_x1, lambda),    weighted_xr(d.wl, p.lower_x2, lambda),
          weighted_xr(d.wu, p.upper_x1, lambda),    weighted_xr(d.wu, p.upper_x2, lambda)};
}

ShapeUpdate shapes_from_terms(const WeightedRegions& d, const ComponentMasses& m,
                              const RateTerms& t, const Shapes& previous) {
  ShapeUpdate out;
  out.denominators = {t.log_d + t.log_l1 + t.log_u1, t.log_d + t.log_l2 + t.log_u2,
                      t.log_d + t.log_l1 + t.log_u2};
  out.numerators = {m.u1 * d.sum_wl + d.sum_wu, d.sum_wl + m.w1 * d.sum_wu,
                    d.sum_wd + m.u2 * d.sum_wl + m.w2 * d.sum_wu};
  for (std::size_t i = 0; i < 3; ++i) {
    const double value = -out.numerators[i] / out.denominators[i];
    if (out.denominators[i] < 0.0 && out.numerators[i] > 0.0 && std::isfinite(value) &&
        value > 0.0) {
      out.shapes[i] = value;
    } else {
      out.shapes[i] = previous[i];
      out.degenerate[i] = true;
    }
  }
  return out;
}

double count_term(const WeightedRegions& d, const ComponentMasses& m) {
  return d.sum_wd + 2 * m.u1 * d.sum_wl + 2 * m.u2 * d.sum_wl + 2 * m.w1 * d.sum_wu +
         2 * m.w2 * d.sum_wu;
}

double data_term(const WeightedRegions& d, const ComponentMasses& m, const RateTerms& t,
                 const Shapes& s) {
  const double a1 = s[0];
  const double a2 = s[1];
  const double a3 = s[2];
  const double a13 = a1 + a3;
  const double a23 = a2 + a3;
  return d.sum_d_y - (a1 + a2 + a3 - 1) * t.xr_d                      //
         + m.u1 * d.sum_l_x1 - m.u1 * (a13 - 1) * t.xr_l1              //
         + m.u2 * d.sum_l_x1 - m.u2 * (a13 - 1) * t.xr_l1              //
         + m.w1 * d.sum_u_x2 - m.w1 * (a23 - 1) * t.xr_u2              //
         + m.w2 * d.sum_u_x2 - m.w2 * (a23 - 1) * t.xr_u2              //
         + d.sum_u_x1 - (a1 - 1) * t.xr_u1                             //
         + d.sum_l_x2 - (a2 - 1) * t.xr_l2;
}

double component_q(const WeightedRegions& d, const ComponentMasses& m, const RateTerms& t,
                   const Shapes& s, double lambda) {
  const double a1 = s[0];
  const double a2 = s[1];
  const double a3 = s[2];
  const double a13 = a1 + a3;
  const double a23 = a2 + a3;
  const double ll = std::log(lambda);
  double q = d.sum_wd * std::log(a3) + d.sum_wd * ll + (a1 + a2 + a3 - 1) * t.log_d -
             lambda * d.sum_d_y;
  q += m.u1 * (d.sum_wl * std::log(a1) + 2 * d.sum_wl * ll - lambda * d.sum_l_x1 +
               (a13 - 1) * t.log_l1);
  q += m.u2 * (d.sum_wl * std::log(a3) + 2 * d.sum_wl * ll - lambda * d.sum_l_x1 +
               (a13 - 1) * t.log_l1);
  q += d.sum_wl * std::log(a2) - lambda * d.sum_l_x2 + (a2 - 1) * t.log_l2;
  q += m.w1 * (d.sum_wu * std::log(a2) + 2 * d.sum_wu * ll - lambda * d.sum_u_x2 +
               (a23 - 1) * t.log_u2);
  q += m.w2 * (d.sum_wu * std::log(a3) + 2 * d.sum_wu * ll - lambda * d.sum_u_x2 +
               (a23 - 1) * t.log_u2);
  q += d.sum_wu * std::log(a1) - lambda * d.sum_u_x1 + (a1 - 1) * t.log_u1;
  return q;
}

Shapes shapes_of(const BVGEParams& c) { return {c.alpha1(), c.alpha2(), c.alpha3()}; }

bool nearly_equal(double a, double b, double rel) {
  return std::fabs(a - b) <= rel * std::max(std::fabs(a), std::fabs(b));
}

}  // namespace

std::vector<BVGEPair> DataPartition::pairs() const {
  std::vector<BVGEPair> out(size());
  for (Eigen::Index i = 0; i < n0(); ++i) {
    out[diag_index[i]] = {diag_y[i], diag_y[i], Region::Diagonal};
  }
  for (Eigen::Index i = 0; i < n1(); ++i) {
    out[lower_index[i]] = {lower_x1[i], lower_x2[i], Region::Lower};
  }
  for (Eigen::Index i = 0; i < n2(); ++i) {
    out[upper_index[i]] = {upper_x1[i], upper_x2[i], Region::Upper};
  }
  return out;
}

namespace {

DataPartition build_partition(std::span<const BVGEPair> pts) {
  std::vector<double> dy, l1, l2, u1, u2;
  DataPartition part;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& pt = pts[i];
    switch (pt.region) {
      case Region::Diagonal:
        dy.push_back(pt.x1);
        part.diag_index.push_back(i);
        break;
      case Region::Lower:
        l1.push_back(pt.x1);
        l2.push_back(pt.x2);
        part.lower_index.push_back(i);
        break;
      case Region::Upper:
        u1.push_back(pt.x1);
        u2.push_back(pt.x2);
        part.upper_index.push_back(i);
        break;
    }
  }
  auto to_array = [](const std::vector<double>& v) {
    return Eigen::ArrayXd(Eigen::Map<const Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  part.diag_y = to_array(dy);
  part.lower_x1 = to_array(l1);
  part.lower_x2 = to_array(l2);
  part.upper_x1 = to_array(u1);
  part.upper_x2 = to_array(u2);
  return part;
}

}  // namespace

DataPartition partition_data(std::span<const Point2> pairs, double tie_tol) {
  if (pairs.empty()) throw std::invalid_argument("no observations");
  std::vector<BVGEPair> pts;
  pts.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [x1, x2] = pairs[i];
    if (!(std::isfinite(x1) && std::isfinite(x2) && x1 > 0.0 && x2 > 0.0)) {
      throw std::invalid_argument("row " + std::to_string(i) +
                                  ": coordinates must be positive and finite");
    }
    pts.push_back(BVGEPair::classified(x1, x2, tie_tol));
  }
  return build_partition(pts);
}

DataPartition partition_data(std::span<const LabeledPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("no observations");
  std::vector<BVGEPair> pts;
  pts.reserve(pairs.size());
  for (const auto& lp : pairs) pts.push_back(lp.pair);
  return build_partition(pts);
}

const Eigen::ArrayXd& Posteriors::weights(int component, Region region) const noexcept {
  switch (region) {
    case Region::Diagonal:
      return component == 0 ? diag0 : diag1;
    case Region::Lower:
      return component == 0 ? lower0 : lower1;
    case Region::Upper:
    default:
      return component == 0 ? upper0 : upper1;
  }
}

Posteriors Posteriors::pinned(const DataPartition& part, int component) {
  const double v0 = component == 0 ? 1.0 : 0.0;
  Posteriors post;
  post.diag0 = Eigen::ArrayXd::Constant(part.n0(), v0);
  post.lower0 = Eigen::ArrayXd::Constant(part.n1(), v0);
  post.upper0 = Eigen::ArrayXd::Constant(part.n2(), v0);
  post.diag1 = 1.0 - post.diag0;
  post.lower1 = 1.0 - post.lower0;
  post.upper1 = 1.0 - post.upper0;
  return post;
}

ComponentMasses ComponentMasses::from(const BVGEParams& c) noexcept {
  const double a13 = c.alpha1() + c.alpha3();
  const double a23 = c.alpha2() + c.alpha3();
  return {c.alpha1() / a13, c.alpha3() / a13, c.alpha2() / a23, c.alpha3() / a23};
}

FractionalMasses FractionalMasses::from(const MixtureParams& params) noexcept {
  return {ComponentMasses::from(params.comp0()), ComponentMasses::from(params.comp1())};
}

EStep e_step(const MixtureParams& params, const DataPartition& part) {
  EStep out;
  out.masses = FractionalMasses::from(params);
  const double log_p0 = std::log(params.p());
  const double log_p1 = std::log1p(-params.p());
  double loglik = 0.0;
  std::size_t degenerate = 0;

  auto region_pass = [&](Region region, const Eigen::ArrayXd& x1, const Eigen::ArrayXd& x2,
                         Eigen::ArrayXd& r0, Eigen::ArrayXd& r1) {
    const Eigen::Index n = x1.size();
    r0.resize(n);
    r1.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double l0 = log_p0 + bvge_log_density(params.comp0(), region, x1[i], x2[i]);
      const double l1 = log_p1 + bvge_log_density(params.comp1(), region, x1[i], x2[i]);
      const double hi = std::max(l0, l1);
      if (!std::isfinite(hi)) {
        r0[i] = 0.5;
        r1[i] = 0.5;
        ++degenerate;
        loglik += -kInf;
        continue;
      }
      const double lse = hi + std::log1p(std::exp(std::min(l0, l1) - hi));
      r0[i] = std::max(std::exp(l0 - lse), kResponsibilityFloor);
      r1[i] = 1.0 - r0[i];
      loglik += lse;
    }
  };
  region_pass(Region::Diagonal, part.diag_y, part.diag_y, out.posteriors.diag0,
              out.posteriors.diag1);
  region_pass(Region::Lower, part.lower_x1, part.lower_x2, out.posteriors.lower0,
              out.posteriors.lower1);
  region_pass(Region::Upper, part.upper_x1, part.upper_x2, out.posteriors.upper0,
              out.posteriors.upper1);
  out.posteriors.degenerate_points = degenerate;
  out.loglik = loglik;
  return out;
}

double m_step_weight(const Posteriors& post, std::size_t n) {
  if (n == 0) throw std::invalid_argument("m_step_weight: n must be positive");
  return (post.diag0.sum() + post.lower0.sum() + post.upper0.sum()) / static_cast<double>(n);
}

ShapeUpdate m_step_shapes(const Posteriors& post, const FractionalMasses& masses,
                          const DataPartition& part, double lambda, int component,
                          const Shapes& previous) {
  const WeightedRegions d(post, part, component);
  return shapes_from_terms(d, masses.of(component), rate_terms(d, lambda), previous);
}

std::string_view to_string(InitStrategy s) noexcept {
  return s == InitStrategy::Random ? "random" : "moment";
}

std::optional<InitStrategy> parse_init_strategy(std::string_view s) noexcept {
  if (s == "random") return InitStrategy::Random;
  if (s == "moment") return InitStrategy::Moment;
  return std::nullopt;
}

std::string_view to_string(StopReason r) noexcept {
  return r == StopReason::Tolerance ? "tolerance" : "iteration_cap";
}

void EMConfig::validate() const {
  if (!(rel_tol > 0)) throw std::invalid_argument("rel_tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (!(fp_tol > 0)) throw std::invalid_argument("fp_tol must be positive");
  if (fp_max_iter < 1) throw std::invalid_argument("fp_max_iter must be at least 1");
  if (!(fp_damping > 0 && fp_damping <= 1)) {
    throw std::invalid_argument("fp_damping must lie in (0,1]");
  }
  if (!(tie_tol >= 0)) throw std::invalid_argument("tie_tol must be non-negative");
}

RateSolution solve_rate(const std::function<double(double)>& map,
                        const std::function<double(double)>& score, double initial,
                        const EMConfig& cfg) {
  RateSolution out;
  double lambda = initial;
  double damping = cfg.fp_damping;
  double previous_residual = 0.0;
  bool escaped = !(std::isfinite(lambda) && lambda > 0.0);

  for (int it = 1; it <= cfg.fp_max_iter && !escaped; ++it) {
    out.iterations = it;
    const double g = map(lambda);
    if (!(std::isfinite(g) && g > 0.0)) {
      escaped = true;
      break;
    }
    const double residual = g - lambda;
    if (std::fabs(residual) < cfg.fp_tol) {
      out.rate = lambda;
      out.residual = residual;
      out.converged = true;
      return out;
    }
    if (it > 1 && (residual > 0) != (previous_residual > 0)) damping *= 0.5;
    previous_residual = residual;
    const double next = lambda + damping * residual;
    if (!(std::isfinite(next) && next > 0.0)) {
      escaped = true;
      break;
    }
    lambda = next;
  }

  // Bracketing fallback on score(lambda) = E - lambda F(lambda), which is
  // positive near zero and negative for large lambda.
  out.used_fallback = true;
  double centre = (std::isfinite(lambda) && lambda > 0.0) ? lambda : 1.0;
  if (std::isfinite(initial) && initial > 0.0 && escaped) centre = initial;
  double lo = centre;
  double hi = centre;
  double s_lo = score(lo);
  double s_hi = s_lo;
  for (int k = 0; k < 200 && !(s_lo > 0.0); ++k) {
    lo *= 0.5;
    s_lo = score(lo);
  }
  for (int k = 0; k < 200 && !(s_hi < 0.0); ++k) {
    hi *= 2.0;
    s_hi = score(hi);
  }
  if (!(s_lo > 0.0 && s_hi < 0.0)) {
    out.rate = std::isfinite(lambda) && lambda > 0.0 ? lambda : initial;
    out.residual = map(out.rate) - out.rate;
    out.converged = false;
    return out;
  }
  boost::uintmax_t max_iter = 400;
  const auto [a, b] = boost::math::tools::toms748_solve(
      score, lo, hi, s_lo, s_hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  out.iterations += static_cast<int>(max_iter);
  // Pick whichever bracket end has the smaller fixed-point residual.
  const double ra = map(a) - a;
  const double rb = map(b) - b;
  if (std::fabs(ra) <= std::fabs(rb)) {
    out.rate = a;
    out.residual = ra;
  } else {
    out.rate = b;
    out.residual = rb;
  }
  out.converged = std::fabs(out.residual) < cfg.fp_tol;
  return out;
}

double rate_map(const Posteriors& post, const FractionalMasses& masses, const DataPartition& part,
                const Shapes& shapes, double lambda, int component) {
  const WeightedRegions d(post, part, component);
  const auto& m = masses.of(component);
  return count_term(d, m) / data_term(d, m, rate_terms(d, lambda), shapes);
}

RateSolution lambda_fixed_point(const Posteriors& post, const FractionalMasses& masses,
                                const DataPartition& part, const Shapes& shapes,
                                double initial, int component, const EMConfig& cfg) {
  const WeightedRegions d(post, part, component);
  const auto& m = masses.of(component);
  const double e = count_term(d, m);
  auto map = [&](double lambda) { return e / data_term(d, m, rate_terms(d, lambda), shapes); };
  auto score = [&](double lambda) {
    return e - lambda * data_term(d, m, rate_terms(d, lambda), shapes);
  };
  return solve_rate(map, score, initial, cfg);
}

RateSolution lambda_profile_fixed_point(const Posteriors& post, const FractionalMasses& masses,
                                        const DataPartition& part, double initial,
                                        int component, const EMConfig& cfg,
                                        const Shapes& previous) {
  const WeightedRegions d(post, part, component);
  const auto& m = masses.of(component);
  const double e = count_term(d, m);
  auto profiled_data_term = [&](double lambda) {
    const RateTerms t = rate_terms(d, lambda);
    return data_term(d, m, t, shapes_from_terms(d, m, t, previous).shapes);
  };
  auto map = [&](double lambda) { return e / profiled_data_term(lambda); };
  auto score = [&](double lambda) { return e - lambda * profiled_data_term(lambda); };
  return solve_rate(map, score, initial, cfg);
}

double component_pseudo_loglik(const Posteriors& post, const FractionalMasses& masses,
                               const DataPartition& part, const Shapes& shapes, double lambda,
                               int component) {
  const WeightedRegions d(post, part, component);
  return component_q(d, masses.of(component), rate_terms(d, lambda), shapes, lambda);
}

double pseudo_loglik(const MixtureParams& params, const Posteriors& post,
                     const FractionalMasses& masses, const DataPartition& part) {
  const double w0 = post.diag0.sum() + post.lower0.sum() + post.upper0.sum();
  const double w1 = post.diag1.sum() + post.lower1.sum() + post.upper1.sum();
  double q = w0 * std::log(params.p()) + w1 * std::log1p(-params.p());
  for (int k = 0; k < 2; ++k) {
    const auto& c = params.component(k);
    q += component_pseudo_loglik(post, masses, part, shapes_of(c), c.lambda(), k);
  }
  return q;
}

BVGEParams bvge_em_update(const BVGEParams& current, const DataPartition& part,
                          const EMConfig& cfg) {
  const double a1 = current.alpha1();
  const double a2 = current.alpha2();
  const double a3 = current.alpha3();
  const double u1 = a1 / (a1 + a3);
  const double u2 = a3 / (a1 + a3);
  const double w1 = a2 / (a2 + a3);
  const double w2 = a3 / (a2 + a3);
  const auto n0 = static_cast<double>(part.n0());
  const auto n1 = static_cast<double>(part.n1());
  const auto n2 = static_cast<double>(part.n2());

  auto log_s = [](double x, double lambda) { return log1mexp(lambda * x); };
  auto xr = [](double x, double lambda) { return x / std::expm1(lambda * x); };

  // Shape maximizers at a given rate.
  auto shapes_at = [&](double lambda) {
    double sd = 0, sl1 = 0, sl2 = 0, su1 = 0, su2 = 0;
    for (Eigen::Index i = 0; i < part.n0(); ++i) sd += log_s(part.diag_y[i], lambda);
    for (Eigen::Index i = 0; i < part.n1(); ++i) {
      sl1 += log_s(part.lower_x1[i], lambda);
      sl2 += log_s(part.lower_x2[i], lambda);
    }
    for (Eigen::Index i = 0; i < part.n2(); ++i) {
      su1 += log_s(part.upper_x1[i], lambda);
      su2 += log_s(part.upper_x2[i], lambda);
    }
    const Shapes denominators = {sd + sl1 + su1, sd + sl2 + su2, sd + sl1 + su2};
    const Shapes numerators = {u1 * n1 + n2, n1 + w1 * n2, n0 + u2 * n1 + w2 * n2};
    const Shapes fallback = {a1, a2, a3};
    Shapes out{};
    for (std::size_t k = 0; k < 3; ++k) {
      const double v = -numerators[k] / denominators[k];
      out[k] = (denominators[k] < 0 && numerators[k] > 0 && std::isfinite(v) && v > 0)
                   ? v
                   : fallback[k];
    }
    return out;
  };

  // Sum over points of the rate score terms, with the shapes profiled.
  const double count = n0 + 2 * u1 * n1 + 2 * u2 * n1 + 2 * w1 * n2 + 2 * w2 * n2;
  auto data = [&](double lambda) {
    const Shapes s = shapes_at(lambda);
    const double b13 = s[0] + s[2];
    const double b23 = s[1] + s[2];
    const double bsum = s[0] + s[1] + s[2];
    double f = 0.0;
    for (Eigen::Index i = 0; i < part.n0(); ++i) {
      const double y = part.diag_y[i];
      f += y - (bsum - 1) * xr(y, lambda);
    }
    for (Eigen::Index i = 0; i < part.n1(); ++i) {
      const double x1 = part.lower_x1[i];
      const double x2 = part.lower_x2[i];
      f += x1 - (b13 - 1) * xr(x1, lambda) + x2 - (s[1] - 1) * xr(x2, lambda);
    }
    for (Eigen::Index i = 0; i < part.n2(); ++i) {
      const double x1 = part.upper_x1[i];
      const double x2 = part.upper_x2[i];
      f += x2 - (b23 - 1) * xr(x2, lambda) + x1 - (s[0] - 1) * xr(x1, lambda);
    }
    return f;
  };
  const RateSolution sol = solve_rate([&](double l) { return count / data(l); },
                                      [&](double l) { return count - l * data(l); },
                                      current.lambda(), cfg);
  const double rate = sol.converged || sol.used_fallback ? sol.rate : current.lambda();
  const Shapes s = shapes_at(rate);
  return {s[0], s[1], s[2], rate};
}

FitResult em_fit(const DataPartition& part, const EMConfig& cfg, const MixtureParams& init) {
  cfg.validate();
  if (part.size() < 2) throw std::invalid_argument("em_fit needs at least two observations");
  if (part.n1() + part.n2() == 0) {
    throw ModelInadequacyError(
        "every observation lies on the diagonal; the mixture is not identifiable from ties alone");
  }

  FitResult result{init, {}, 0, false, StopReason::IterationCap};
  MixtureParams theta = init;
  EStep es = e_step(theta, part);
  result.loglik_trace.push_back(es.loglik);
  result.degenerate_points = es.posteriors.degenerate_points;
  const double p_max = std::nextafter(1.0, 0.0);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const double p = std::clamp(m_step_weight(es.posteriors, part.size()),
                                std::numeric_limits<double>::min(), p_max);
    std::array<BVGEParams, 2> comps = {theta.comp0(), theta.comp1()};
    for (int k = 0; k < 2; ++k) {
      const BVGEParams& old = theta.component(k);
      const Shapes prev = shapes_of(old);
      // Conditional maximizer at the current rate: never worse than `old`.
      const ShapeUpdate base =
          m_step_shapes(es.posteriors, es.masses, part, old.lambda(), k, prev);
      const double q_base = component_pseudo_loglik(es.posteriors, es.masses, part, base.shapes,
                                                    old.lambda(), k);

      const RateSolution sol = lambda_profile_fixed_point(es.posteriors, es.masses, part,
                                                          old.lambda(), k, cfg, prev);
      result.rate_fallbacks += sol.used_fallback ? 1 : 0;
      Shapes shapes = base.shapes;
      double rate = old.lambda();
      if (sol.converged) {
        const ShapeUpdate upd = m_step_shapes(es.posteriors, es.masses, part, sol.rate, k, prev);
        const double q_new =
            component_pseudo_loglik(es.posteriors, es.masses, part, upd.shapes, sol.rate, k);
        if (q_new >= q_base - 1e-12 * std::fabs(q_base)) {
          shapes = upd.shapes;
          rate = sol.rate;
          for (bool flag : upd.degenerate) result.degenerate_shape_updates += flag ? 1 : 0;
        } else {
          ++result.rejected_updates;
        }
      } else {
        ++result.rate_failures;
      }
      if (rate == old.lambda()) {
        for (bool flag : base.degenerate) result.degenerate_shape_updates += flag ? 1 : 0;
      }
      comps[static_cast<std::size_t>(k)] = BVGEParams{shapes[0], shapes[1], shapes[2], rate};
    }
    theta = MixtureParams{p, comps[0], comps[1]};

    const double previous = es.loglik;
    es = e_step(theta, part);
    result.loglik_trace.push_back(es.loglik);
    result.degenerate_points = std::max(result.degenerate_points, es.posteriors.degenerate_points);
    result.iterations = it;
    result.max_loglik_decrease = std::max(result.max_loglik_decrease, previous - es.loglik);

    const double change = std::fabs(es.loglik - previous) / (std::fabs(previous) + 1.0);
    if (change < cfg.rel_tol) {
      result.converged = true;
      result.stop_reason = StopReason::Tolerance;
      break;
    }
  }

  result.params = theta;
  const auto a = theta.comp0();
  const auto b = theta.comp1();
  result.components_coincide =
      nearly_equal(a.alpha1(), b.alpha1(), 1e-6) && nearly_equal(a.alpha2(), b.alpha2(), 1e-6) &&
      nearly_equal(a.alpha3(), b.alpha3(), 1e-6) && nearly_equal(a.lambda(), b.lambda(), 1e-6);
  return result;
}

FitResult em_fit(const DataPartition& part, const EMConfig& cfg) {
  Rng rng(cfg.seed);
  return em_fit(part, cfg, initial_guess(part, cfg.init, rng));
}

}  // namespace mbvge
