#include "cli.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbvge/dependence.hpp"
#include "mbvge/mixture.hpp"
#include "mbvge/study.hpp"

namespace mbvge::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest = line;
  for (;;) {
    const auto comma = rest.find(',');
    out.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != end) return std::nullopt;
  return v;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

void write_json(const std::string& path, const json& j) {
  auto os = open_output(path);
  os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Parameters

constexpr std::array<const char*, 9> kShortNames = {"p",  "a1", "a2", "a3", "l1",
                                                    "b1", "b2", "b3", "l2"};

MixtureParams params_from_json(const json& j) {
  if (!j.is_object()) throw UsageError("parameters must be a JSON object");
  std::array<double, 9> v{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    const char* keys[] = {kParameterNames[i], kShortNames[i]};
    bool found = false;
    for (const char* key : keys) {
      if (j.contains(key)) {
        if (!j[key].is_number()) throw UsageError(std::string("parameter ") + key + " must be a number");
        v[i] = j[key].get<double>();
        found = true;
      }
    }
    if (!found) throw UsageError(std::string("missing parameter ") + kParameterNames[i]);
  }
  return MixtureParams::from_array(v);
}

json params_to_json(const MixtureParams& params) {
  json j = json::object();
  const auto v = params.to_array();
  for (std::size_t i = 0; i < v.size(); ++i) j[kParameterNames[i]] = v[i];
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": invalid JSON: " + e.what());
  }
}

struct ParamOptions {
  std::string file;
  std::array<double, 9> flags{};
  std::array<CLI::Option*, 9> opts{};

  void attach(CLI::App& app) {
    app.add_option("--params", file, "JSON file with the nine parameters");
    for (std::size_t i = 0; i < flags.size(); ++i) {
      opts[i] = app.add_option(std::string("--") + kShortNames[i], flags[i], kParameterNames[i]);
    }
  }

  /// Flags win over the file.
  MixtureParams resolve() const {
    json j = file.empty() ? json::object() : read_json_file(file);
    if (!j.is_object()) throw UsageError("--params file must hold a JSON object");
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (opts[i]->count() > 0) {
        j.erase(kShortNames[i]);
        j[kParameterNames[i]] = flags[i];
      }
    }
    return params_from_json(j);
  }
};

void append_params(std::vector<std::string>& args, const MixtureParams& params) {
  const auto v = params.to_array();
  for (std::size_t i = 0; i < v.size(); ++i) {
    args.push_back(std::string("--") + kShortNames[i]);
    args.push_back(format_double(v[i]));
  }
}

// ---------------------------------------------------------------------------
// Manifests

struct Manifest {
  std::string command;
  std::vector<std::string> args;  // resolved command line, replayable as is
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json config = json::object();

  json embedded() const {
    json j;
    j["tool"] = "mbvge";
    j["version"] = std::string(kVersion);
    j["command"] = command;
    j["args"] = args;
    j["seed"] = has_seed ? json(seed) : json(nullptr);
    j["config"] = config;
    json in = json::array();
    for (const auto& path : inputs) in.push_back({{"path", path}, {"fnv1a64", file_digest(path)}});
    j["inputs"] = in;
    j["outputs"] = outputs;
    return j;
  }

  void write(const std::string& path, const std::string& started, double seconds) const {
    json j = embedded();
    j["started_utc"] = started;
    j["finished_utc"] = utc_now();
    j["wall_seconds"] = seconds;
    write_json(path, j);
  }
};

class Stopwatch {
 public:
  Stopwatch() : started_(utc_now()), t0_(std::chrono::steady_clock::now()) {}
  const std::string& started() const { return started_; }
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

// ---------------------------------------------------------------------------
// Commands

struct SampleCmd {
  ParamOptions params;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::string out;

  int run(std::ostream& os) const {
    const Stopwatch clock;
    const MixtureParams theta = params.resolve();
    if (n < 1) throw UsageError("n must be at least 1");
    Rng rng(seed);
    const auto sample = mix_sample(theta, n, rng);
    {
      auto file = open_output(out);
      file << "x1,x2,region,label\n";
      for (const auto& lp : sample) {
        file << format_double(lp.pair.x1) << ',' << format_double(lp.pair.x2) << ','
             << to_string(lp.pair.region) << ',' << lp.label << '\n';
      }
    }
    Manifest m{"sample", {"sample"}, seed, true, {}, {out}, {}};
    append_params(m.args, theta);
    m.args.insert(m.args.end(),
                  {"--n", std::to_string(n), "--seed", std::to_string(seed), "--out", out});
    m.config = {{"params", params_to_json(theta)}, {"n", n}};
    m.write(manifest_path(out), clock.started(), clock.seconds());
    os << "wrote " << n << " pairs to " << out << '\n';
    return kSuccess;
  }
};

struct GridCmd {
  ParamOptions params;
  double xmin = 0.0;
  double xmax = 0.0;
  int steps = 0;
  std::string out;
  std::string diag_out;

  int run(std::ostream& os) const {
    const Stopwatch clock;
    const MixtureParams theta = params.resolve();
    if (!(xmin >= 0.0) || !std::isfinite(xmin)) throw UsageError("xmin must be non-negative");
    if (!(xmax > xmin) || !std::isfinite(xmax)) throw UsageError("xmax must exceed xmin");
    if (steps < 2) throw UsageError("steps must be at least 2");
    const std::string diag = diag_out.empty() ? out + ".diag.csv" : diag_out;

    std::vector<double> grid(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
      grid[static_cast<std::size_t>(i)] =
          i == steps - 1 ? xmax : xmin + (xmax - xmin) * i / (steps - 1);
    }
    {
      auto file = open_output(out);
      file << "x1,x2,density\n";
      for (double x1 : grid) {
        for (double x2 : grid) {
          // Grid points on the diagonal report the absolutely continuous
          // channel approached from below (x1 < x2).
          const Region r = x1 > x2 ? Region::Upper : Region::Lower;
          const double d = mix_density(theta, BVGEPair{x1, x2, r}).value;
          file << format_double(x1) << ',' << format_double(x2) << ',' << format_double(d)
               << '\n';
        }
      }
    }
    {
      auto file = open_output(diag);
      file << "x,diag_density\n";
      for (double x : grid) {
        const double d = mix_density(theta, BVGEPair{x, x, Region::Diagonal}).value;
        file << format_double(x) << ',' << format_double(d) << '\n';
      }
    }
    Manifest m{"density-grid", {"density-grid"}, 0, false, {}, {out, diag}, {}};
    append_params(m.args, theta);
    m.args.insert(m.args.end(), {"--xmin", format_double(xmin), "--xmax", format_double(xmax),
                                 "--steps", std::to_string(steps), "--out", out});
    if (!diag_out.empty()) m.args.insert(m.args.end(), {"--diag-out", diag_out});
    m.config = {{"params", params_to_json(theta)}, {"xmin", xmin}, {"xmax", xmax},
                {"steps", steps}};
    m.write(manifest_path(out), clock.started(), clock.seconds());
    os << "wrote " << steps * steps << " grid points to " << out << " and " << steps
       << " diagonal points to " << diag << '\n';
    return kSuccess;
  }
};

struct EmOptions {
  EMConfig cfg;
  std::string init = "random";

  void attach(CLI::App& app) {
    app.add_option("--rel-tol", cfg.rel_tol, "relative log-likelihood change threshold");
    app.add_option("--max-iter", cfg.max_iter, "outer iteration cap");
    app.add_option("--fp-tol", cfg.fp_tol, "fixed-point residual tolerance");
    app.add_option("--fp-max-iter", cfg.fp_max_iter, "fixed-point iteration cap");
    app.add_option("--fp-damping", cfg.fp_damping, "fixed-point relaxation factor in (0,1]");
    app.add_option("--init", init, "initialization: random or moment");
    app.add_option("--tie-tol", cfg.tie_tol, "relative tolerance for classifying ties");
  }

  EMConfig resolve(std::uint64_t seed) const {
    EMConfig c = cfg;
    const auto strategy = parse_init_strategy(init);
    if (!strategy) throw UsageError("init must be random or moment");
    c.init = *strategy;
    c.seed = seed;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

json em_config_json(const EMConfig& c) {
  return {{"rel_tol", c.rel_tol},         {"max_iter", c.max_iter},
          {"fp_tol", c.fp_tol},           {"fp_max_iter", c.fp_max_iter},
          {"fp_damping", c.fp_damping},   {"init", std::string(to_string(c.init))},
          {"tie_tol", c.tie_tol}};
}

void append_em(std::vector<std::string>& args, const EMConfig& c) {
  args.insert(args.end(), {"--rel-tol", format_double(c.rel_tol), "--max-iter",
                           std::to_string(c.max_iter), "--fp-tol", format_double(c.fp_tol),
                           "--fp-max-iter", std::to_string(c.fp_max_iter), "--fp-damping",
                           format_double(c.fp_damping), "--init", std::string(to_string(c.init)),
                           "--tie-tol", format_double(c.tie_tol)});
}

struct FitCmd {
  std::string data;
  EmOptions em;
  std::uint64_t seed = 1;
  std::string out;

  int run(std::ostream& os) const {
    const Stopwatch clock;
    const EMConfig cfg = em.resolve(seed);
    const auto pairs = read_pairs(data);
    if (pairs.size() < 2) throw UsageError(data + ": need at least 2 observations");
    const DataPartition part = partition_data(pairs, cfg.tie_tol);
    Rng rng(cfg.seed);
    const MixtureParams init = initial_guess(part, cfg.init, rng);
    const FitResult fit = em_fit(part, cfg, init);

    Manifest m{"fit", {"fit", "--data", data}, seed, true, {data}, {out}, {}};
    append_em(m.args, cfg);
    m.args.insert(m.args.end(), {"--seed", std::to_string(seed), "--out", out});
    m.config = em_config_json(cfg);

    json j;
    j["estimates"] = params_to_json(fit.params);
    j["initial"] = params_to_json(init);
    j["loglik"] = fit.loglik_trace.back();
    j["loglik_trace"] = fit.loglik_trace;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["stop_reason"] = std::string(to_string(fit.stop_reason));
    j["components_coincide"] = fit.components_coincide;
    j["data"] = {{"n", part.size()}, {"n0", part.n0()}, {"n1", part.n1()}, {"n2", part.n2()}};
    j["diagnostics"] = {{"max_loglik_decrease", fit.max_loglik_decrease},
                        {"degenerate_shape_updates", fit.degenerate_shape_updates},
                        {"rate_fallbacks", fit.rate_fallbacks},
                        {"rate_failures", fit.rate_failures},
                        {"degenerate_points", fit.degenerate_points},
                        {"rejected_updates", fit.rejected_updates}};
    j["manifest"] = m.embedded();
    write_json(out, j);
    m.write(manifest_path(out), clock.started(), clock.seconds());

    os << "fit " << (fit.converged ? "converged" : "stopped at the iteration cap") << " after "
       << fit.iterations << " iterations, loglik " << format_double(fit.loglik_trace.back())
       << '\n';
    const auto v = fit.params.to_array();
    for (std::size_t i = 0; i < v.size(); ++i) {
      os << "  " << std::left << std::setw(8) << kParameterNames[i] << format_double(v[i]) << '\n';
    }
    if (fit.components_coincide) os << "  components coincide; p is not identifiable\n";
    return kSuccess;
  }
};

StudyConfig study_config_from_json(const json& j) {
  static const std::vector<std::string> known = {
      "truth",          "n",       "replications",  "seed", "label_resolution",
      "exclude_capped", "em",      "runaway_bound", "max_restarts"};
  if (!j.is_object()) throw UsageError("study config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("unknown study config key " + key);
    }
  }
  if (!j.contains("truth")) throw UsageError("study config needs truth");
  StudyConfig cfg{params_from_json(j["truth"])};
  try {
    if (j.contains("n")) cfg.n = j["n"].get<std::size_t>();
    if (j.contains("replications")) cfg.replications = j["replications"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("exclude_capped")) cfg.exclude_capped = j["exclude_capped"].get<bool>();
    if (j.contains("runaway_bound")) cfg.runaway_bound = j["runaway_bound"].get<double>();
    if (j.contains("max_restarts")) cfg.max_restarts = j["max_restarts"].get<int>();
    if (j.contains("label_resolution")) {
      const auto mode = parse_label_resolution(j["label_resolution"].get<std::string>());
      if (!mode) throw UsageError("label_resolution must be match_truth or lambda_order");
      cfg.label_resolution = *mode;
    }
    if (j.contains("em")) {
      const json& e = j["em"];
      if (!e.is_object()) throw UsageError("em must be a JSON object");
      for (const auto& [key, value] : e.items()) {
        if (key == "rel_tol") cfg.em.rel_tol = value.get<double>();
        else if (key == "max_iter") cfg.em.max_iter = value.get<int>();
        else if (key == "fp_tol") cfg.em.fp_tol = value.get<double>();
        else if (key == "fp_max_iter") cfg.em.fp_max_iter = value.get<int>();
        else if (key == "fp_damping") cfg.em.fp_damping = value.get<double>();
        else if (key == "tie_tol") cfg.em.tie_tol = value.get<double>();
        else if (key == "init") {
          const auto s = parse_init_strategy(value.get<std::string>());
          if (!s) throw UsageError("em.init must be random or moment");
          cfg.em.init = *s;
        } else {
          throw UsageError("unknown em config key " + key);
        }
      }
    }
  } catch (const json::type_error& e) {
    throw UsageError(std::string("study config: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

json study_config_json(const StudyConfig& cfg) {
  return {{"truth", params_to_json(cfg.truth)},
          {"n", cfg.n},
          {"replications", cfg.replications},
          {"seed", cfg.seed},
          {"label_resolution", std::string(to_string(cfg.label_resolution))},
          {"exclude_capped", cfg.exclude_capped},
          {"runaway_bound", cfg.runaway_bound},
          {"max_restarts", cfg.max_restarts},
          {"em", em_config_json(cfg.em)}};
}

unsigned default_threads() {
  if (const char* env = std::getenv("MBVGE_THREADS")) {
    const auto v = parse_double(env);
    if (v && *v >= 0 && *v == std::floor(*v)) return static_cast<unsigned>(*v);
  }
  return 0;
}

struct StudyCmd {
  std::string config;
  std::string out_dir;
  unsigned threads = default_threads();

  int run(std::ostream& os) const {
    const Stopwatch clock;
    StudyConfig cfg = study_config_from_json(read_json_file(config));
    cfg.threads = threads;
    const StudyReport report = run_study(cfg);

    const std::string csv_path = (fs::path(out_dir) / "replications.csv").string();
    const std::string summary_path = (fs::path(out_dir) / "summary.json").string();
    {
      auto file = open_output(csv_path);
      file << "rep,seed";
      for (const char* name : kParameterNames) file << ',' << name;
      file << ",iterations,converged,restarts,error\n";
      for (const auto& rec : report.records) {
        file << rec.rep << ',' << rec.seed;
        if (rec.estimate) {
          for (double v : rec.estimate->to_array()) file << ',' << format_double(v);
        } else {
          for (std::size_t i = 0; i < kParameterNames.size(); ++i) file << ",nan";
        }
        std::string error = rec.error;
        std::replace(error.begin(), error.end(), ',', ';');
        file << ',' << rec.iterations << ',' << (rec.converged ? 1 : 0) << ',' << rec.restarts
             << ',' << error << '\n';
      }
    }
    json params = json::array();
    const auto truth = cfg.truth.to_array();
    for (std::size_t i = 0; i < truth.size(); ++i) {
      params.push_back({{"name", kParameterNames[i]},
                        {"truth", truth[i]},
                        {"ae", report.ae[i]},
                        {"mse", report.mse[i]}});
    }
    json summary = {{"config", study_config_json(cfg)}, {"parameters", params},
                    {"replications", report.records.size()}, {"used", report.used},
                    {"nonconverged", report.nonconverged}, {"failed", report.failed},
                    {"restarts", report.restarts}};
    write_json(summary_path, summary);

    Manifest m{"simstudy",
               {"simstudy", "--config", config, "--out-dir", out_dir, "--threads",
                std::to_string(threads)},
               cfg.seed,
               true,
               {config},
               {csv_path, summary_path},
               study_config_json(cfg)};
    m.write((fs::path(out_dir) / "manifest.json").string(), clock.started(), clock.seconds());

    os << std::left << std::setw(10) << "parameter" << std::setw(10) << "truth" << std::setw(12)
       << "AE" << "MSE\n";
    for (std::size_t i = 0; i < truth.size(); ++i) {
      os << std::setw(10) << kParameterNames[i] << std::setw(10) << format_double(truth[i])
         << std::fixed << std::setprecision(5) << std::setw(12) << report.ae[i] << report.mse[i]
         << std::defaultfloat << '\n';
    }
    os << "replications " << report.records.size() << ", used " << report.used
       << ", non-converged " << report.nonconverged << ", failed " << report.failed
       << ", restarts " << report.restarts << '\n';
    return kSuccess;
  }
};

json measure(double verbatim, bool in_range, double numeric) {
  return {{"verbatim", verbatim}, {"verbatim_in_range", in_range}, {"numeric", numeric}};
}

struct DependenceCmd {
  ParamOptions params;
  std::string out;

  int run(std::ostream& os) const {
    const Stopwatch clock;
    const MixtureParams theta = params.resolve();
    const DependenceSummary s = dependence_summary(theta);
    json j;
    j["parameters"] = params_to_json(theta);
    j["kendall_tau"] = measure(s.kendall_verbatim, s.kendall_verbatim_in_range, s.kendall_numeric);
    j["spearman_rho"] = measure(s.spearman_verbatim, s.spearman_verbatim_in_range, s.spearman_numeric);
    j["upper_tail"] =
        measure(s.tail_upper_verbatim, s.tail_upper_verbatim_in_range, s.tail_upper_numeric);
    j["lower_tail"] = {{"value", s.tail_lower},
                       {"ratio_at_1e-6", lower_tail_ratio(theta, 1e-6)}};

    Manifest m{"dependence", {"dependence"}, 0, false, {}, {out}, {}};
    append_params(m.args, theta);
    m.args.insert(m.args.end(), {"--out", out});
    m.config = {{"params", params_to_json(theta)}};
    j["manifest"] = m.embedded();
    write_json(out, j);
    m.write(manifest_path(out), clock.started(), clock.seconds());

    auto line = [&os](const char* name, double verbatim, bool ok, double numeric) {
      os << std::left << std::setw(14) << name << "verbatim " << std::setw(24) << format_double(verbatim)
         << (ok ? "" : "(out of range) ") << "numeric " << format_double(numeric) << '\n';
    };
    line("kendall_tau", s.kendall_verbatim, s.kendall_verbatim_in_range, s.kendall_numeric);
    line("spearman_rho", s.spearman_verbatim, s.spearman_verbatim_in_range, s.spearman_numeric);
    line("upper_tail", s.tail_upper_verbatim, s.tail_upper_verbatim_in_range, s.tail_upper_numeric);
    os << std::setw(14) << "lower_tail" << format_double(s.tail_lower) << '\n';
    return kSuccess;
  }
};

struct ReplayCmd {
  std::string manifest;
  std::string out;
  std::string diag_out;

  std::vector<std::string> resolve() const {
    const json j = read_json_file(manifest);
    if (!j.contains("args") || !j["args"].is_array()) {
      throw UsageError(manifest + ": not a manifest");
    }
    auto args = j["args"].get<std::vector<std::string>>();
    if (args.empty() || args.front() == "replay") throw UsageError(manifest + ": not replayable");
    for (const auto& in : j.value("inputs", json::array())) {
      const std::string path = in.at("path").get<std::string>();
      if (!fs::exists(path)) throw std::runtime_error("input " + path + " is missing");
      if (file_digest(path) != in.at("fnv1a64").get<std::string>()) {
        throw std::runtime_error("input " + path + " changed since the manifest was written");
      }
    }
    auto replace = [&args](const std::string& flag, const std::string& value) {
      const auto it = std::find(args.begin(), args.end(), flag);
      if (it != args.end() && it + 1 != args.end()) {
        *(it + 1) = value;
      } else {
        args.insert(args.end(), {flag, value});
      }
    };
    if (!out.empty()) replace(args.front() == "simstudy" ? "--out-dir" : "--out", out);
    if (!diag_out.empty()) replace("--diag-out", diag_out);
    return args;
  }
};

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read " + path);
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  bool header = true;
  while (std::getline(is, line)) {
    ++number;
    if (trim(line).empty()) continue;
    if (header) {
      table.header = split_fields(line);
      header = false;
      continue;
    }
    table.rows.push_back(split_fields(line));
    table.line_numbers.push_back(number);
  }
  return table;
}

std::vector<Point2> read_pairs(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read " + path);
  std::vector<Point2> out;
  std::string line;
  std::size_t number = 0;
  std::size_t c1 = 0;
  std::size_t c2 = 1;
  bool first = true;
  while (std::getline(is, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (first) {
      first = false;
      const auto i1 = std::find(fields.begin(), fields.end(), "x1");
      const auto i2 = std::find(fields.begin(), fields.end(), "x2");
      if (i1 != fields.end() && i2 != fields.end()) {
        c1 = static_cast<std::size_t>(i1 - fields.begin());
        c2 = static_cast<std::size_t>(i2 - fields.begin());
        continue;
      }
    }
    const std::string where = "line " + std::to_string(number) + ": ";
    if (fields.size() <= std::max(c1, c2)) throw UsageError(where + "expected 2 numeric fields");
    const auto x1 = parse_double(fields[c1]);
    const auto x2 = parse_double(fields[c2]);
    if (!x1 || !x2) throw UsageError(where + "expected 2 numeric fields");
    if (!(std::isfinite(*x1) && std::isfinite(*x2) && *x1 > 0 && *x2 > 0)) {
      throw UsageError(where + "coordinates must be positive and finite");
    }
    out.push_back({*x1, *x2});
  }
  if (out.empty()) throw UsageError(path + ": no observations");
  return out;
}

std::string file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c = 0;
  while (is.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixtures of bivariate generalized exponential distributions", "mbvge"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SampleCmd sample;
  auto* sample_app = app.add_subcommand("sample", "draw pairs from a mixture");
  sample.params.attach(*sample_app);
  sample_app->add_option("--n", sample.n, "number of pairs")->required();
  sample_app->add_option("--seed", sample.seed, "master seed");
  sample_app->add_option("--out", sample.out, "output CSV")->required();

  GridCmd grid;
  auto* grid_app = app.add_subcommand("density-grid", "tabulate the density on a square grid");
  grid.params.attach(*grid_app);
  grid_app->add_option("--xmin", grid.xmin, "lower grid bound");
  grid_app->add_option("--xmax", grid.xmax, "upper grid bound")->required();
  grid_app->add_option("--steps", grid.steps, "grid points per axis")->required();
  grid_app->add_option("--out", grid.out, "output CSV")->required();
  grid_app->add_option("--diag-out", grid.diag_out, "diagonal CSV (default <out>.diag.csv)");

  FitCmd fit;
  auto* fit_app = app.add_subcommand("fit", "fit the mixture by EM");
  fit_app->add_option("--data", fit.data, "CSV with columns x1,x2")->required();
  fit.em.attach(*fit_app);
  fit_app->add_option("--seed", fit.seed, "seed of the initial guess");
  fit_app->add_option("--out", fit.out, "output JSON")->required();

  StudyCmd study;
  auto* study_app = app.add_subcommand("simstudy", "run a parameter-recovery study");
  study_app->add_option("--config", study.config, "study config JSON")->required();
  study_app->add_option("--out-dir", study.out_dir, "output directory")->required();
  study_app->add_option("--threads", study.threads,
                        "worker threads, 0 for all cores (default $MBVGE_THREADS or 0)");

  DependenceCmd dep;
  auto* dep_app = app.add_subcommand("dependence", "dependence measures of a mixture");
  dep.params.attach(*dep_app);
  dep_app->add_option("--out", dep.out, "output JSON")->required();

  ReplayCmd replay;
  auto* replay_app = app.add_subcommand("replay", "rerun the command recorded in a manifest");
  replay_app->add_option("manifest", replay.manifest, "manifest JSON")->required();
  replay_app->add_option("--out", replay.out, "redirect the primary output");
  replay_app->add_option("--diag-out", replay.diag_out, "redirect the diagonal grid output");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*sample_app) return sample.run(out);
    if (*grid_app) return grid.run(out);
    if (*fit_app) return fit.run(out);
    if (*study_app) return study.run(out);
    if (*dep_app) return dep.run(out);
    if (*replay_app) return run(replay.resolve(), out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ModelInadequacyError& e) {
    err << "model inadequacy: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace mbvge::cli
