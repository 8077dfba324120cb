#pragma once

// Parameter-recovery study: draw R samples from a known mixture, fit each,
// align labels with the truth and report average estimates and MSE.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mbvge/em.hpp"
#include "mbvge/mixture.hpp"

namespace mbvge {

enum class LabelResolution { MatchTruth, LambdaOrder };

std::string_view to_string(LabelResolution r) noexcept;
std::optional<LabelResolution> parse_label_resolution(std::string_view s) noexcept;

/// MatchTruth: identity or swap, whichever has the smaller summed relative
/// squared distance to `truth`. LambdaOrder: comp0 gets the larger rate.
MixtureParams resolve_labels(const MixtureParams& estimate, const MixtureParams& truth,
                             LabelResolution mode);

struct StudyConfig {
  explicit StudyConfig(MixtureParams t) : truth(t) {}

  MixtureParams truth;
  std::size_t n = 1000;
  std::size_t replications = 100;
  EMConfig em;
  std::uint64_t seed = 1;
  LabelResolution label_resolution = LabelResolution::MatchTruth;
  bool exclude_capped = false;
  /// Worker count; 0 means hardware concurrency.
  unsigned threads = 1;
  /// A fit with a shape or rate outside [1 / runaway_bound, runaway_bound] is
  /// treated as a run-off to the parameter boundary and restarted from a fresh
  /// random guess, at most max_restarts times.
  double runaway_bound = 1e4;
  int max_restarts = 4;

  void validate() const;
};

struct ReplicationRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::optional<MixtureParams> estimate;  // empty when the fit aborted
  int iterations = 0;
  bool converged = false;
  int restarts = 0;
  bool runaway = false;  // still outside the bound after the last restart
  std::string error;
};

struct StudyReport {
  std::array<double, 9> ae{};
  std::array<double, 9> mse{};
  std::size_t used = 0;          // replications entering AE/MSE
  std::size_t nonconverged = 0;  // fits stopped by the iteration cap
  std::size_t failed = 0;        // fits that aborted
  std::size_t restarts = 0;      // total restarts over all replications
  std::vector<ReplicationRecord> records;
  double wall_seconds = 0;
};

/// Replication r draws its sample and initial guess from
/// derive_seed(cfg.seed, r); results do not depend on the thread count.
StudyReport run_study(const StudyConfig& cfg);

/// True when every shape and rate of `params` lies within [1 / bound, bound].
bool within_bounds(const MixtureParams& params, double bound) noexcept;

/// Single replication, exposed for reruns and tests.
ReplicationRecord run_replication(const StudyConfig& cfg, std::size_t rep);

/// AE/MSE over the records, honoring exclude_capped.
void aggregate(const StudyConfig& cfg, StudyReport& report);

}  // namespace mbvge
