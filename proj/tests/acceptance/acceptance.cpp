// Acceptance suite. Prints one PASS/FAIL line per criterion, preceded by
// indented detail lines, and exits non-zero if any criterion fails.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mbvge/dependence.hpp"
#include "mbvge/em.hpp"
#include "mbvge/quadrature.hpp"
#include "mbvge/study.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace mbvge;

namespace {

// Tolerances.
constexpr double kAeFloor = 0.08;
constexpr double kAeBiasFactor = 2.0;
constexpr double kMseFactor = 4.0;
constexpr double kBeta2MseCap = 1.5;
constexpr double kTraceSlack = 1e-10;
constexpr double kStationarityTol = 1e-5;
constexpr double kResidualTol = 1e-9;
constexpr double kProfileTol = 1e-4;
constexpr double kMassTol = 1e-3;
constexpr double kSeFactor = 3.0;
constexpr double kBoundaryTol = 1e-12;
constexpr double kSklarTol = 1e-10;
constexpr double kRectangleTol = 1e-12;
constexpr double kIndependenceTol = 0.01;
constexpr double kLowerTailCap = 1e-3;
constexpr double kReductionTol = 1e-12;

int failures = 0;

void detail(const std::string& text) { std::cout << "    " << text << '\n'; }

void verdict(int id, const std::string& name, bool ok) {
  std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << id << ": " << name << '\n'
            << std::flush;
  failures += ok ? 0 : 1;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

DataPartition sample_partition(const MixtureParams& m, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return partition_data(mix_sample(m, n, rng));
}

Shapes shapes_of(const BVGEParams& c) { return {c.alpha1(), c.alpha2(), c.alpha3()}; }

// ---------------------------------------------------------------------------
// Criteria 1 and 2.

struct ReferenceBlock {
  std::array<double, 9> ae;
  std::array<double, 9> mse;
};

// n = 1000 blocks, in the order p, a1, a2, a3, l1, b1, b2, b3, l2.
const ReferenceBlock kReferenceSet1 = {
    {0.2889, 1.0457, 1.2556, 1.0046, 1.00825, 0.9988, 1.3885, 1.998, 0.50148},
    {0.0027, 0.0314, 0.0459, 0.0194, 0.01978, 0.0114, 0.0189, 0.025, 0.00034}};
const ReferenceBlock kReferenceSet2 = {
    {0.5847, 0.5039, 0.4071, 0.2886, 2.05437, 0.5052, 1.6028, 0.53907, 1.5300},
    {0.00697, 0.0021, 0.0021, 0.0017, 0.05437, 0.0122, 0.9205, 0.01404, 0.0168}};

bool reference_reproduction(const MixtureParams& truth, const ReferenceBlock& ref, bool beta2_cap_only) {
  StudyConfig cfg(truth);
  cfg.n = 1000;
  cfg.replications = 100;
  cfg.seed = 1;
  const StudyReport report = run_study(cfg);
  detail("replications used " + std::to_string(report.used) + ", non-converged " +
         std::to_string(report.nonconverged) + ", failed " + std::to_string(report.failed) +
         ", restarts " + std::to_string(report.restarts) + ", wall " + fmt(report.wall_seconds) +
         " s");
  const auto t = truth.to_array();
  bool ok = report.failed == 0;
  for (std::size_t i = 0; i < 9; ++i) {
    const double bias_tol = std::max(kAeBiasFactor * std::fabs(ref.ae[i] - t[i]), kAeFloor);
    const bool ae_ok = std::fabs(report.ae[i] - t[i]) <= bias_tol;
    bool mse_ok;
    std::string mse_rule;
    if (beta2_cap_only && i == 6) {
      mse_ok = report.mse[i] <= kBeta2MseCap;
      mse_rule = "<= " + fmt(kBeta2MseCap);
    } else {
      const double ratio = report.mse[i] / ref.mse[i];
      mse_ok = ratio <= kMseFactor && ratio >= 1.0 / kMseFactor;
      mse_rule = "ratio " + fmt(ratio);
    }
    ok = ok && ae_ok && mse_ok;
    detail(std::string(kParameterNames[i]) + ": AE " + fmt(report.ae[i]) + " (truth " + fmt(t[i]) +
           ", reference " + fmt(ref.ae[i]) + ", tol " + fmt(bias_tol) + ") " +
           (ae_ok ? "ok" : "out") + "; MSE " + fmt(report.mse[i]) + " (reference " +
           fmt(ref.mse[i]) + ", " + mse_rule + ") " + (mse_ok ? "ok" : "out"));
  }
  return ok;
}

// ---------------------------------------------------------------------------
// Criterion 3.

double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo;
  double b = hi;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > 1e-10 * (std::fabs(a) + std::fabs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return (a + b) / 2;
}

// Five-point central difference.
double derivative(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

MixtureParams random_params(Rng& rng) {
  auto shape = [&] { return std::exp(rng.uniform(std::log(0.3), std::log(3.0))); };
  auto rate = [&] { return std::exp(rng.uniform(std::log(0.3), std::log(3.0))); };
  const double p = rng.uniform(0.2, 0.8);
  const BVGEParams a{shape(), shape(), shape(), rate()};
  const BVGEParams b{shape(), shape(), shape(), rate()};
  return {p, a, b};
}

bool em_correctness() {
  const EMConfig cfg;

  // Monotone traces on 50 seeded fits.
  double worst_trace = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto truth = seed % 2 ? oracle::set1() : oracle::set2();
    const DataPartition part = sample_partition(truth, 300, 1000 + seed);
    EMConfig fit_cfg = cfg;
    fit_cfg.seed = seed;
    const FitResult fit = em_fit(part, fit_cfg);
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
      const double drop = fit.loglik_trace[i - 1] - fit.loglik_trace[i];
      worst_trace = std::max(worst_trace, drop / std::fabs(fit.loglik_trace[i - 1]));
    }
  }
  const bool trace_ok = worst_trace <= kTraceSlack;
  detail("largest relative log-likelihood decrease over 50 fits: " + fmt(worst_trace));

  // Stationarity of the M-step and residuals of the inner solves at 20 random states.
  Rng rng(77);
  double worst_grad = 0.0;
  double worst_residual = 0.0;
  int unconverged_inner = 0;
  for (int s = 0; s < 20; ++s) {
    const MixtureParams state = random_params(rng);
    const auto truth = s % 2 ? oracle::set1() : oracle::set2();
    const DataPartition part = sample_partition(truth, 100, 2000 + static_cast<std::uint64_t>(s));
    const EStep es = e_step(state, part);
    const double p = m_step_weight(es.posteriors, part.size());
    std::array<Shapes, 2> shapes;
    std::array<double, 2> rates{};
    for (int k = 0; k < 2; ++k) {
      const auto& c = state.component(k);
      const RateSolution sol =
          lambda_profile_fixed_point(es.posteriors, es.masses, part, c.lambda(), k, cfg, shapes_of(c));
      const RateSolution fixed = lambda_fixed_point(es.posteriors, es.masses, part, shapes_of(c),
                                                    c.lambda(), k, cfg);
      for (const auto* r : {&sol, &fixed}) {
        if (r->converged) {
          worst_residual = std::max(worst_residual, std::fabs(r->residual));
        } else {
          ++unconverged_inner;
        }
      }
      rates[static_cast<std::size_t>(k)] = sol.rate;
      shapes[static_cast<std::size_t>(k)] =
          m_step_shapes(es.posteriors, es.masses, part, sol.rate, k, shapes_of(c)).shapes;
    }
    auto q_at = [&](std::size_t coord, double value) {
      std::array<double, 9> v = {p,        shapes[0][0], shapes[0][1], shapes[0][2], rates[0],
                                 shapes[1][0], shapes[1][1], shapes[1][2], rates[1]};
      v[coord] = value;
      return pseudo_loglik(MixtureParams::from_array(v), es.posteriors, es.masses, part);
    };
    const std::array<double, 9> at = {p,        shapes[0][0], shapes[0][1], shapes[0][2], rates[0],
                                      shapes[1][0], shapes[1][1], shapes[1][2], rates[1]};
    for (std::size_t i = 0; i < 9; ++i) {
      const double h = 1e-3 * std::min(at[i], i == 0 ? 1 - at[i] : at[i]);
      const double g = derivative([&](double x) { return q_at(i, x); }, at[i], h);
      worst_grad = std::max(worst_grad, std::fabs(g));
    }
  }
  const bool grad_ok = worst_grad < kStationarityTol;
  const bool residual_ok = worst_residual < kResidualTol;
  detail("largest |dQ| at the M-step update over 20 random states: " + fmt(worst_grad));
  detail("largest converged fixed-point residual: " + fmt(worst_residual) + " (" +
         std::to_string(unconverged_inner) + " inner solves unconverged)");

  // Profile rate against golden-section search on 20 datasets.
  EMConfig tight = cfg;
  tight.fp_tol = 1e-12;
  double worst_profile = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto truth = seed % 2 ? oracle::set1() : oracle::set2();
    const DataPartition part = sample_partition(truth, 300, 3000 + seed);
    const EStep es = e_step(truth, part);
    const int k = static_cast<int>(seed % 2);
    const Shapes prev = shapes_of(truth.component(k));
    const auto profile = [&](double log_lambda) {
      const double l = std::exp(log_lambda);
      const Shapes s = m_step_shapes(es.posteriors, es.masses, part, l, k, prev).shapes;
      return component_pseudo_loglik(es.posteriors, es.masses, part, s, l, k);
    };
    const double expected = std::exp(golden_max(profile, std::log(0.01), std::log(100.0)));
    const RateSolution sol = lambda_profile_fixed_point(es.posteriors, es.masses, part,
                                                        truth.component(k).lambda(), k, tight, prev);
    worst_profile = std::max(worst_profile, std::fabs(sol.rate / expected - 1));
  }
  const bool profile_ok = worst_profile <= kProfileTol;
  detail("largest relative gap to the golden-section profile maximum: " + fmt(worst_profile));
  return trace_ok && grad_ok && residual_ok && profile_ok;
}

// ---------------------------------------------------------------------------
// Criterion 4.

bool distributional() {
  bool ok = true;
  for (const auto& m : {oracle::set1(), oracle::set2()}) {
    for (int k = 0; k < 2; ++k) {
      const MassBreakdown mass = component_total_mass(m.component(k));
      const bool good = std::fabs(mass.total() - 1.0) <= kMassTol;
      ok = ok && good;
      detail("component mass " + fmt(mass.total()) + (good ? " ok" : " out"));
    }
    const MassBreakdown mass = mixture_total_mass(m);
    const bool mass_ok = std::fabs(mass.total() - 1.0) <= kMassTol;

    const std::size_t n = 100000;
    Rng rng(m.p() < 0.5 ? 41 : 42);
    const auto draws = mix_sample(m, n, rng);
    std::vector<double> x1;
    std::vector<double> x2;
    std::size_t ties = 0;
    for (const auto& d : draws) {
      x1.push_back(d.pair.x1);
      x2.push_back(d.pair.x2);
      ties += d.pair.region == Region::Diagonal ? 1 : 0;
    }
    const double expected = mix_singular_mass(m);
    const double tie_gap = std::fabs(static_cast<double>(ties) / n - expected);
    const bool tie_ok = tie_gap <= kSeFactor * oracle::binomial_se(expected, n);
    const double crit = oracle::ks_critical_1pct(n);
    const double ks1 = oracle::ks_statistic(x1, [&](double t) { return marginal_cdf(m, 1, t); });
    const double ks2 = oracle::ks_statistic(x2, [&](double t) { return marginal_cdf(m, 2, t); });
    const bool ks_ok = ks1 < crit && ks2 < crit;
    ok = ok && mass_ok && tie_ok && ks_ok;
    detail("p = " + fmt(m.p()) + ": mixture mass " + fmt(mass.total()) + ", tie gap " +
           fmt(tie_gap) + " (3 SE " + fmt(kSeFactor * oracle::binomial_se(expected, n)) +
           "), KS " + fmt(ks1) + " / " + fmt(ks2) + " (critical " + fmt(crit) + ")");
  }
  return ok;
}

// ---------------------------------------------------------------------------
// Criterion 5.

bool copula_suite() {
  double worst_boundary = 0.0;
  double worst_sklar = 0.0;
  double worst_volume = 0.0;
  Rng rng(5);
  for (const auto& m : {oracle::set1(), oracle::set2()}) {
    for (double u = 0.0; u <= 1.0; u += 0.05) {
      for (int k = 0; k < 2; ++k) {
        const auto& c = m.component(k);
        worst_boundary = std::max({worst_boundary, std::fabs(copula_component(c, {u, 1.0}) - u),
                                   std::fabs(copula_component(c, {1.0, u}) - u),
                                   std::fabs(copula_component(c, {u, 0.0})),
                                   std::fabs(copula_component(c, {0.0, u}))});
      }
      worst_boundary = std::max({worst_boundary, std::fabs(copula_mixture(m, {u, 1.0}) - u),
                                 std::fabs(copula_mixture(m, {1.0, u}) - u),
                                 std::fabs(copula_mixture(m, {u, 0.0})),
                                 std::fabs(copula_mixture(m, {0.0, u}))});
    }
    for (int k = 0; k < 2; ++k) {
      const auto& c = m.component(k);
      for (int i = 1; i <= 10; ++i) {
        for (int j = 1; j <= 10; ++j) {
          const double x1 = 0.3 * i;
          const double x2 = 0.3 * j;
          const CopulaPoint pt{ge_cdf(c.marginal1(), x1), ge_cdf(c.marginal2(), x2)};
          worst_sklar = std::max(worst_sklar, std::fabs(copula_component(c, pt) - bvge_cdf(c, x1, x2)));
        }
      }
    }
    for (int r = 0; r < 100; ++r) {
      double u1 = rng.uniform();
      double u2 = rng.uniform();
      double v1 = rng.uniform();
      double v2 = rng.uniform();
      if (u1 > u2) std::swap(u1, u2);
      if (v1 > v2) std::swap(v1, v2);
      auto c = [&](double u, double v) { return copula_mixture(m, {u, v}); };
      const double vol = c(u2, v2) - c(u1, v2) - c(u2, v1) + c(u1, v1);
      worst_volume = std::min(worst_volume, vol);
    }
  }
  detail("largest boundary error " + fmt(worst_boundary) + ", largest Sklar error " +
         fmt(worst_sklar) + ", smallest rectangle volume " + fmt(worst_volume));
  return worst_boundary <= kBoundaryTol && worst_sklar <= kSklarTol &&
         worst_volume >= -kRectangleTol;
}

// ---------------------------------------------------------------------------
// Criterion 6.

bool dependence_oracles() {
  bool ok = true;
  std::uint64_t seed = 60;
  for (const auto& m : {oracle::set1(), oracle::set2()}) {
    Rng rng(seed++);
    const double tau = kendall_tau_numeric(m);
    const double rho = spearman_rho_numeric(m);
    const McEstimate tau_mc = kendall_tau_mc(m, 100000, rng);
    const McEstimate rho_mc = spearman_rho_mc(m, 100000, rng);
    const bool tau_ok = std::fabs(tau - tau_mc.estimate) <= kSeFactor * tau_mc.std_error;
    const bool rho_ok = std::fabs(rho - rho_mc.estimate) <= kSeFactor * rho_mc.std_error;
    const double lower = lower_tail_ratio(m, 1e-6);
    const bool lower_ok = lower < kLowerTailCap;
    ok = ok && tau_ok && rho_ok && lower_ok;
    detail("p = " + fmt(m.p()) + ": tau " + fmt(tau) + " vs " + fmt(tau_mc.estimate) + " +- " +
           fmt(tau_mc.std_error) + (tau_ok ? " ok" : " out") + "; rho " + fmt(rho) + " vs " +
           fmt(rho_mc.estimate) + " +- " + fmt(rho_mc.std_error) + (rho_ok ? " ok" : " out") +
           "; C(t,t)/t at 1e-6 " + fmt(lower) + (lower_ok ? " ok" : " out"));
  }
  const BVGEParams c{1, 1, 1e-6, 1};
  const MixtureParams indep(0.5, c, c);
  const double tau0 = kendall_tau_numeric(indep);
  const double rho0 = spearman_rho_numeric(indep);
  const bool indep_ok = std::fabs(tau0) <= kIndependenceTol && std::fabs(rho0) <= kIndependenceTol;
  detail("independence limit: tau " + fmt(tau0) + ", rho " + fmt(rho0));
  return ok && indep_ok;
}

// ---------------------------------------------------------------------------
// Criterion 7.

bool reduction() {
  EMConfig cfg;
  cfg.fp_tol = 1e-13;
  double worst = 0.0;
  Rng rng(7);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const BVGEParams truth{std::exp(rng.uniform(-1, 1)), std::exp(rng.uniform(-1, 1)),
                           std::exp(rng.uniform(-1, 1)), std::exp(rng.uniform(-1, 1))};
    const DataPartition part = sample_partition(MixtureParams(0.5, truth, truth), 400, 700 + seed);
    const BVGEParams current{1.0, 1.0, 1.0, 1.0};
    const BVGEParams direct = bvge_em_update(current, part, cfg);
    const Posteriors post = Posteriors::pinned(part, 0);
    const auto masses = FractionalMasses::from(MixtureParams(0.5, current, current));
    const RateSolution sol = lambda_profile_fixed_point(post, masses, part, current.lambda(), 0,
                                                        cfg, shapes_of(current));
    const Shapes s = m_step_shapes(post, masses, part, sol.rate, 0, shapes_of(current)).shapes;
    worst = std::max({worst, std::fabs(sol.rate / direct.lambda() - 1),
                      std::fabs(s[0] / direct.alpha1() - 1), std::fabs(s[1] / direct.alpha2() - 1),
                      std::fabs(s[2] / direct.alpha3() - 1)});
    worst = std::max(worst, std::fabs(m_step_weight(post, part.size()) - 1.0));
  }
  detail("largest relative difference from the single-component update: " + fmt(worst));
  return worst <= kReductionTol;
}

// ---------------------------------------------------------------------------
// Criterion 8.

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "mbvge_acceptance_replay";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream out;
  std::ostringstream err;
  auto run = [&](const std::vector<std::string>& args) { return cli::run(args, out, err); };
  const std::vector<std::string> params = {"--p",  "0.3", "--a1", "1", "--a2", "1.2",
                                           "--a3", "1",   "--l1", "1", "--b1", "1",
                                           "--b2", "1.4", "--b3", "2", "--l2", "0.5"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), params.begin(), params.end());
    return a;
  };
  const auto p = [&](const char* name) { return (dir / name).string(); };
  {
    std::ofstream(p("study.json")) << R"({"truth": {"p": 0.6, "alpha1": 0.5, "alpha2": 0.4,
      "alpha3": 0.3, "lambda1": 2, "beta1": 0.5, "beta2": 1.5, "beta3": 0.5, "lambda2": 1.5},
      "n": 100, "replications": 3, "seed": 9})";
  }

  struct Case {
    std::string name;
    std::vector<std::string> args;
    std::string manifest;
    std::vector<std::string> outputs;
  };
  const std::vector<Case> cases = {
      {"sample", with({"sample", "--n", "500", "--seed", "4", "--out", p("s.csv")}),
       p("s.csv.manifest.json"), {p("s.csv")}},
      {"density-grid",
       with({"density-grid", "--xmax", "3", "--steps", "25", "--out", p("g.csv")}),
       p("g.csv.manifest.json"), {p("g.csv"), p("g.csv.diag.csv")}},
      {"fit", {"fit", "--data", p("s.csv"), "--seed", "3", "--out", p("f.json")},
       p("f.json.manifest.json"), {p("f.json")}},
      {"simstudy", {"simstudy", "--config", p("study.json"), "--out-dir", p("study"), "--threads", "1"},
       p("study/manifest.json"), {p("study/replications.csv"), p("study/summary.json")}},
      {"dependence", with({"dependence", "--out", p("d.json")}), p("d.json.manifest.json"),
       {p("d.json")}},
  };
  bool ok = true;
  for (const auto& c : cases) {
    if (run(c.args) != 0) {
      detail(c.name + ": command failed: " + err.str());
      ok = false;
      continue;
    }
    std::vector<std::string> before;
    for (const auto& o : c.outputs) before.push_back(slurp(o));
    const int code = run({"replay", c.manifest});
    bool same = code == 0;
    for (std::size_t i = 0; i < c.outputs.size(); ++i) same = same && slurp(c.outputs[i]) == before[i];
    detail(c.name + ": replay " + (same ? "bit-identical" : "differs"));
    ok = ok && same;
  }
  fs::remove_all(dir);
  return ok;
}

}  // namespace

int main() {
  std::cout << "acceptance suite\n";
  {
    const bool ok = reference_reproduction(oracle::set1(), kReferenceSet1, false);
    verdict(1, "simulation study, parameter set 1, n=1000, R=100", ok);
  }
  {
    const bool ok = reference_reproduction(oracle::set2(), kReferenceSet2, true);
    verdict(2, "simulation study, parameter set 2, n=1000, R=100", ok);
  }
  verdict(3, "EM correctness (trace, stationarity, residuals, profile oracle)", em_correctness());
  verdict(4, "distributional checks (mass, ties, marginal KS)", distributional());
  verdict(5, "copula checks (boundaries, Sklar, 2-increasing)", copula_suite());
  verdict(6, "dependence oracles (tau, rho, independence, lower tail)", dependence_oracles());
  verdict(7, "single-component reduction of the M-step", reduction());
  verdict(8, "CLI replay from manifests is bit-identical", reproducibility());
  std::cout << failures << " of 8 criteria failed\n";
  return failures == 0 ? 0 : 1;
}
