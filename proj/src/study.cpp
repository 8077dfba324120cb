#include "mbvge/study.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <stdexcept>
#include <thread>

namespace mbvge {

std::string_view to_string(LabelResolution r) noexcept {
  return r == LabelResolution::MatchTruth ? "match_truth" : "lambda_order";
}

std::optional<LabelResolution> parse_label_resolution(std::string_view s) noexcept {
  if (s == "match_truth") return LabelResolution::MatchTruth;
  if (s == "lambda_order") return LabelResolution::LambdaOrder;
  return std::nullopt;
}

namespace {

double relative_distance(const MixtureParams& a, const MixtureParams& truth) {
  const auto x = a.to_array();
  const auto t = truth.to_array();
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (x[i] - t[i]) / t[i];
    d += r * r;
  }
  return d;
}

}  // namespace

MixtureParams resolve_labels(const MixtureParams& estimate, const MixtureParams& truth,
                             LabelResolution mode) {
  if (mode == LabelResolution::LambdaOrder) {
    return estimate.comp0().lambda() >= estimate.comp1().lambda() ? estimate
                                                                   : estimate.swapped();
  }
  const MixtureParams swapped = estimate.swapped();
  return relative_distance(swapped, truth) < relative_distance(estimate, truth) ? swapped
                                                                                 : estimate;
}

void StudyConfig::validate() const {
  if (n < 50) throw std::invalid_argument("n must be at least 50");
  if (replications < 1) throw std::invalid_argument("replications must be at least 1");
  if (!(runaway_bound > 1)) throw std::invalid_argument("runaway_bound must exceed 1");
  if (max_restarts < 0) throw std::invalid_argument("max_restarts must be non-negative");
  em.validate();
}

bool within_bounds(const MixtureParams& params, double bound) noexcept {
  const auto v = params.to_array();
  return std::all_of(v.begin() + 1, v.end(),
                     [bound](double x) { return x >= 1.0 / bound && x <= bound; });
}

ReplicationRecord run_replication(const StudyConfig& cfg, std::size_t rep) {
  ReplicationRecord rec;
  rec.rep = rep;
  rec.seed = derive_seed(cfg.seed, rep);
  Rng rng(rec.seed);
  const auto sample = mix_sample(cfg.truth, cfg.n, rng);
  try {
    const DataPartition part = partition_data(sample);
    for (int attempt = 0;; ++attempt) {
      const MixtureParams init = initial_guess(part, cfg.em.init, rng);
      const FitResult fit = em_fit(part, cfg.em, init);
      rec.estimate = resolve_labels(fit.params, cfg.truth, cfg.label_resolution);
      rec.iterations = fit.iterations;
      rec.converged = fit.converged;
      rec.runaway = !within_bounds(fit.params, cfg.runaway_bound);
      if (!rec.runaway || attempt == cfg.max_restarts) break;
      ++rec.restarts;
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

void aggregate(const StudyConfig& cfg, StudyReport& report) {
  report.ae.fill(0.0);
  report.mse.fill(0.0);
  report.used = 0;
  report.nonconverged = 0;
  report.failed = 0;
  report.restarts = 0;
  const auto truth = cfg.truth.to_array();
  for (const auto& rec : report.records) {
    report.restarts += static_cast<std::size_t>(rec.restarts);
    if (!rec.estimate) {
      ++report.failed;
      continue;
    }
    if (!rec.converged) {
      ++report.nonconverged;
      if (cfg.exclude_capped) continue;
    }
    const auto est = rec.estimate->to_array();
    for (std::size_t i = 0; i < est.size(); ++i) {
      report.ae[i] += est[i];
      report.mse[i] += (est[i] - truth[i]) * (est[i] - truth[i]);
    }
    ++report.used;
  }
  if (report.used > 0) {
    const auto m = static_cast<double>(report.used);
    for (std::size_t i = 0; i < report.ae.size(); ++i) {
      report.ae[i] /= m;
      report.mse[i] /= m;
    }
  }
}

StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  StudyReport report;
  report.records.resize(cfg.replications);

  unsigned workers = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                      : cfg.threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, cfg.replications));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < cfg.replications; r = next++) {
      report.records[r] = run_replication(cfg, r);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  aggregate(cfg, report);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace mbvge
