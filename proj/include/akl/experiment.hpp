#pragma once
// SPDX-License-Identifier: Apache-2.0

// Experiment harness behind the CLI: flat key=value config files, the four
// experiment kinds, per-(seed, divergence) result files plus a summary JSON.
//
// Config precedence is defaults < config file < command-line flags. All
// validation (including teacher loading) happens before any output file is
// created, so a bad config never leaves partial results behind.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "akl/errors.hpp"
#include "akl/sequence_loss.hpp"
#include "akl/tabular_lm.hpp"
#include "akl/teacher.hpp"
#include "akl/toy_trainer.hpp"
#include "akl/trace_io.hpp"

namespace akl {

/// Configuration problem: bad file, bad key, bad value, missing input.
class config_error : public invalid_input {
 public:
  explicit config_error(const std::string& what) : invalid_input(what) {}
};

enum class ExperimentKind { converge, head_tail, compare, sequence };

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "converge") return ExperimentKind::converge;
  if (s == "head_tail" || s == "head-tail") return ExperimentKind::head_tail;
  if (s == "compare") return ExperimentKind::compare;
  if (s == "sequence") return ExperimentKind::sequence;
  throw config_error("unknown experiment: '" + std::string(s) + "'");
}

inline std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::converge: return "converge";
    case ExperimentKind::head_tail: return "head_tail";
    case ExperimentKind::compare: return "compare";
    case ExperimentKind::sequence: return "sequence";
  }
  return "unknown";
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::converge;
  std::string teacher_path;
  std::vector<DivergenceSpec> divergences;
  double mu = 0.5;
  double learning_rate = 0.5;
  int epochs = 2000;
  std::vector<std::uint64_t> seeds{1};
  std::vector<int> snapshot_epochs;
  std::string out_dir = "results";
  OutputFormat format = OutputFormat::csv;
  int jobs = 1;
  double convergence_tol = 1e-3;
  InitSpec init;
  // sequence experiment only
  int corpus_count = 32;
  int corpus_len = 8;
  std::optional<int> student_order;
};

inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  switch (kind) {
    case ExperimentKind::converge:
      cfg.divergences = {{DivergenceKind::fkl, 0.5}, {DivergenceKind::rkl, 0.5}};
      break;
    case ExperimentKind::head_tail:
      cfg.divergences = {{DivergenceKind::fkl, 0.5}, {DivergenceKind::rkl, 0.5}};
      cfg.epochs = 50;
      cfg.snapshot_epochs = {5};
      break;
    case ExperimentKind::compare:
      // compare always runs the canonical five from one shared init.
      cfg.divergences = {{DivergenceKind::fkl, 0.5},
                         {DivergenceKind::rkl, 0.5},
                         {DivergenceKind::fixed_mix, 0.5},
                         {DivergenceKind::akl, 0.5},
                         {DivergenceKind::akl_r, 0.5}};
      cfg.epochs = 50;
      cfg.init = {InitKind::random_normal, 1.0, {}};
      break;
    case ExperimentKind::sequence:
      cfg.divergences = {{DivergenceKind::akl, 0.5}};
      cfg.epochs = 500;
      cfg.learning_rate = 0.01;
      break;
  }
  return cfg;
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream is(s);
  while (std::getline(is, part, ',')) {
    const auto t = trim(part);
    if (!t.empty()) parts.push_back(t);
  }
  return parts;
}

inline double parse_config_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("bad value for " + key + ": '" + v + "'");
  }
}

inline long long parse_config_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("bad value for " + key + ": '" + v + "'");
  }
}

/// key = value lines; '#' starts a comment; repeated keys preserved in order.
inline std::vector<std::pair<std::string, std::string>> parse_kv_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw config_error(path.string() + ":" + std::to_string(lineno) +
                         ": expected 'key = value'");
    }
    out.emplace_back(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return out;
}

inline InitSpec parse_init_tag(const std::string& v) {
  if (v == "uniform") return {};
  if (v == "normal" || v == "random_normal") return {InitKind::random_normal, 1.0, {}};
  for (const char* prefix : {"normal:", "random_normal:"}) {
    if (v.rfind(prefix, 0) == 0) {
      const auto sigma = parse_config_double(v.substr(std::string(prefix).size()), "init sigma");
      return {InitKind::random_normal, sigma, {}};
    }
  }
  throw config_error("unknown init tag: '" + v + "' (expected uniform or normal[:sigma])");
}

inline std::string init_tag(const InitSpec& init) {
  switch (init.kind) {
    case InitKind::uniform: return "uniform";
    case InitKind::random_normal: {
      std::ostringstream os;
      os << "normal:" << init.sigma;
      return os.str();
    }
    case InitKind::explicit_logits: return "explicit";
  }
  return "unknown";
}

/// Divergence tag usable in a file name: parentheses dropped.
inline std::string divergence_file_tag(const DivergenceSpec& spec) {
  if (spec.kind != DivergenceKind::fixed_mix) return divergence_tag(spec);
  std::ostringstream os;
  os << "fixed_mix_" << spec.alpha;
  return os.str();
}

}  // namespace detail

/// Teacher spec files are key=value too:
///   kind = gaussian_mixture_bins | explicit
///   bins = 100                       (mixture)
///   component = center, width, weight   (mixture; repeatable)
///   probs = p0, p1, ...              (explicit)
inline TeacherSpec parse_teacher_file(const std::filesystem::path& path) {
  TeacherSpec spec;
  bool kind_seen = false;
  for (const auto& [key, value] : detail::parse_kv_file(path)) {
    if (key == "kind") {
      if (value == "gaussian_mixture_bins") {
        spec.kind = TeacherKind::gaussian_mixture_bins;
      } else if (value == "explicit") {
        spec.kind = TeacherKind::explicit_probs;
      } else {
        throw config_error(path.string() + ": unknown teacher kind '" + value + "'");
      }
      kind_seen = true;
    } else if (key == "bins") {
      spec.bins = static_cast<std::size_t>(detail::parse_config_int(value, key));
    } else if (key == "component") {
      const auto parts = detail::split_list(value);
      if (parts.size() != 3) {
        throw config_error(path.string() + ": component needs 'center, width, weight'");
      }
      spec.components.push_back({detail::parse_config_double(parts[0], "component center"),
                                 detail::parse_config_double(parts[1], "component width"),
                                 detail::parse_config_double(parts[2], "component weight")});
    } else if (key == "probs") {
      for (const auto& part : detail::split_list(value)) {
        spec.probs.push_back(detail::parse_config_double(part, "probs"));
      }
    } else {
      throw config_error(path.string() + ": unknown teacher key '" + key + "'");
    }
  }
  if (!kind_seen) throw config_error(path.string() + ": missing 'kind'");
  return spec;
}

/// Applies an experiment config file over cfg. The file's experiment key, if
/// present, must agree with the subcommand.
inline void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  for (const auto& [key, value] : detail::parse_kv_file(path)) {
    if (key == "experiment") {
      if (parse_experiment_kind(value) != cfg.experiment) {
        throw config_error(path.string() + ": experiment '" + value +
                           "' does not match the subcommand '" +
                           experiment_name(cfg.experiment) + "'");
      }
    } else if (key == "teacher") {
      cfg.teacher_path = value;
    } else if (key == "divergences" || key == "divergence") {
      cfg.divergences.clear();
      for (const auto& tag : detail::split_list(value)) {
        try {
          cfg.divergences.push_back(parse_divergence_tag(tag));
        } catch (const invalid_input& e) {
          throw config_error(path.string() + ": " + e.what());
        }
      }
    } else if (key == "mu") {
      cfg.mu = detail::parse_config_double(value, key);
    } else if (key == "lr" || key == "learning_rate") {
      cfg.learning_rate = detail::parse_config_double(value, key);
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(detail::parse_config_int(value, key));
    } else if (key == "seeds" || key == "seed") {
      cfg.seeds.clear();
      for (const auto& part : detail::split_list(value)) {
        cfg.seeds.push_back(static_cast<std::uint64_t>(detail::parse_config_int(part, key)));
      }
    } else if (key == "snapshots" || key == "snapshot") {
      cfg.snapshot_epochs.clear();
      for (const auto& part : detail::split_list(value)) {
        cfg.snapshot_epochs.push_back(static_cast<int>(detail::parse_config_int(part, key)));
      }
    } else if (key == "tol" || key == "convergence_tol") {
      cfg.convergence_tol = detail::parse_config_double(value, key);
    } else if (key == "init") {
      cfg.init = detail::parse_init_tag(value);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "format") {
      try {
        cfg.format = parse_output_format(value);
      } catch (const invalid_input& e) {
        throw config_error(path.string() + ": " + e.what());
      }
    } else if (key == "jobs") {
      cfg.jobs = static_cast<int>(detail::parse_config_int(value, key));
    } else if (key == "corpus_count") {
      cfg.corpus_count = static_cast<int>(detail::parse_config_int(value, key));
    } else if (key == "corpus_len") {
      cfg.corpus_len = static_cast<int>(detail::parse_config_int(value, key));
    } else if (key == "student_order") {
      cfg.student_order = static_cast<int>(detail::parse_config_int(value, key));
    } else {
      throw config_error(path.string() + ": unknown config key '" + key + "'");
    }
  }
}

/// Fully validated experiment: configuration plus loaded teacher.
struct ResolvedExperiment {
  ExperimentConfig cfg;
  // Toy experiments carry (spec, distribution); sequence carries the model.
  std::optional<TeacherSpec> teacher_spec;
  std::optional<Distribution> teacher;
  std::optional<TabularLM> teacher_lm;
  std::vector<double> mode_centers;
};

namespace detail {

/// Local maxima of an explicit teacher, as bin-center positions.
inline std::vector<double> find_modes(const Distribution& p) {
  std::vector<double> centers;
  const std::size_t v = p.size();
  const double floor = 1.5 / static_cast<double>(v);
  for (std::size_t j = 0; j < v; ++j) {
    const bool left_ok = j == 0 || p.probs[j] > p.probs[j - 1];
    const bool right_ok = j + 1 == v || p.probs[j] >= p.probs[j + 1];
    if (left_ok && right_ok && p.probs[j] > floor) {
      centers.push_back(static_cast<double>(j) / static_cast<double>(v - 1));
    }
  }
  return centers;
}

}  // namespace detail

inline ResolvedExperiment resolve_experiment(ExperimentConfig cfg) {
  if (cfg.divergences.empty()) throw config_error("need at least one divergence");
  if (cfg.seeds.empty()) throw config_error("need at least one seed");
  if (cfg.epochs < 1) throw config_error("epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw config_error("learning rate must be > 0");
  if (!(cfg.mu > 0.0) || cfg.mu > 1.0) throw config_error("mu must lie in (0, 1]");
  if (!(cfg.convergence_tol > 0.0)) throw config_error("tol must be > 0");
  if (cfg.jobs < 1) throw config_error("jobs must be >= 1");
  if (cfg.out_dir.empty()) throw config_error("output directory must be set");
  for (int e : cfg.snapshot_epochs) {
    if (e < 0 || e > cfg.epochs) {
      throw config_error("snapshot epoch " + std::to_string(e) + " outside [0, epochs]");
    }
  }
  if (cfg.teacher_path.empty()) throw config_error("a teacher file is required");

  ResolvedExperiment resolved;
  if (cfg.experiment == ExperimentKind::sequence) {
    if (cfg.corpus_count < 1) throw config_error("corpus_count must be >= 1");
    if (cfg.corpus_len < 1) throw config_error("corpus_len must be >= 1");
    try {
      resolved.teacher_lm = TabularLM::load(cfg.teacher_path);
    } catch (const invalid_input& e) {
      throw config_error(e.what());
    }
    if (cfg.student_order && *cfg.student_order < 0) {
      throw config_error("student_order must be >= 0");
    }
  } else {
    TeacherSpec spec = parse_teacher_file(cfg.teacher_path);
    Distribution teacher;
    try {
      teacher = build_teacher(spec);
    } catch (const invalid_input& e) {
      throw config_error(std::string("teacher file ") + cfg.teacher_path + ": " + e.what());
    }
    if (spec.kind == TeacherKind::gaussian_mixture_bins) {
      for (const auto& c : spec.components) resolved.mode_centers.push_back(c.center);
    } else {
      resolved.mode_centers = detail::find_modes(teacher);
    }
    resolved.teacher_spec = std::move(spec);
    resolved.teacher = std::move(teacher);
  }
  resolved.cfg = std::move(cfg);
  return resolved;
}

struct CellResult {
  std::uint64_t seed = 0;
  DivergenceSpec divergence;
  std::string file;
  TrainingTrace trace;
};

namespace detail {

struct CellError {
  std::uint64_t seed;
  std::string divergence;
  std::string message;
  bool is_io;
};

inline TrainConfig cell_train_config(const ExperimentConfig& cfg, const DivergenceSpec& spec,
                                     std::uint64_t seed) {
  TrainConfig tc;
  tc.divergence = spec;
  tc.epochs = cfg.epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.mu = cfg.mu;
  tc.seed = seed;
  tc.snapshot_epochs = cfg.snapshot_epochs;
  tc.convergence_tol = cfg.convergence_tol;
  tc.init = cfg.init;
  return tc;
}

inline TrainingTrace run_cell(const ResolvedExperiment& resolved, const DivergenceSpec& spec,
                              std::uint64_t seed) {
  const ExperimentConfig& cfg = resolved.cfg;
  const TrainConfig tc = cell_train_config(cfg, spec, seed);
  switch (cfg.experiment) {
    case ExperimentKind::converge:
    case ExperimentKind::compare: {
      const auto& teacher = *resolved.teacher;
      const LogitVector z0 = init_student(teacher.size(), seed, cfg.init);
      return train(teacher, z0, tc);
    }
    case ExperimentKind::head_tail: {
      const auto& teacher = *resolved.teacher;
      const LogitVector z0 = head_tail_init(teacher, resolved.mode_centers, cfg.mu, seed);
      return train(teacher, z0, tc);
    }
    case ExperimentKind::sequence: {
      const TabularLM& teacher = *resolved.teacher_lm;
      const std::size_t order = cfg.student_order
                                    ? static_cast<std::size_t>(*cfg.student_order)
                                    : teacher.order();
      TabularLM student0(teacher.vocab(), order);
      const auto corpus = sample_corpus(teacher, static_cast<std::size_t>(cfg.corpus_count),
                                        static_cast<std::size_t>(cfg.corpus_len), seed);
      return distill_sequences(teacher, student0, corpus, tc).trace;
    }
  }
  throw internal_error("run_cell: unhandled experiment kind");
}

}  // namespace detail

/// Executes every (seed, divergence) cell, writes one result file per cell
/// plus summary.json. Returns the process exit code: 0 ok, 3 numerical
/// failure, 4 I/O failure (config problems throw config_error before any
/// output exists; the CLI maps those to exit 2).
inline int run_experiment(const ResolvedExperiment& resolved, std::ostream& diag) {
  const ExperimentConfig& cfg = resolved.cfg;
  const std::string ext = cfg.format == OutputFormat::csv ? ".csv" : ".json";

  struct Cell {
    std::uint64_t seed;
    DivergenceSpec divergence;
  };
  std::vector<Cell> cells;
  for (std::uint64_t seed : cfg.seeds) {
    for (const auto& spec : cfg.divergences) cells.push_back({seed, spec});
  }

  std::vector<CellResult> results(cells.size());
  std::vector<std::optional<detail::CellError>> errors(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const auto& cell = cells[i];
      CellResult& out = results[i];
      out.seed = cell.seed;
      out.divergence = cell.divergence;
      out.file = experiment_name(cfg.experiment) + "_" +
                 detail::divergence_file_tag(cell.divergence) + "_seed" +
                 std::to_string(cell.seed) + ext;
      try {
        out.trace = detail::run_cell(resolved, cell.divergence, cell.seed);
        emit_results(out.trace, cfg.format, std::filesystem::path(cfg.out_dir) / out.file);
      } catch (const io_error& e) {
        errors[i] = {cell.seed, divergence_tag(cell.divergence), e.what(), true};
      } catch (const std::exception& e) {
        errors[i] = {cell.seed, divergence_tag(cell.divergence), e.what(), false};
      }
    }
  };

  const unsigned jobs = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), cells.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& err : errors) {
    if (!err) continue;
    diag << "error: seed " << err->seed << ", divergence " << err->divergence << ": "
         << err->message << '\n';
    return err->is_io ? 4 : 3;
  }

  // Summary.
  nlohmann::json summary{{"version", 1},
                         {"experiment", experiment_name(cfg.experiment)},
                         {"teacher", cfg.teacher_path},
                         {"mu", cfg.mu},
                         {"learning_rate", cfg.learning_rate},
                         {"epochs", cfg.epochs},
                         {"format", cfg.format == OutputFormat::csv ? "csv" : "json"},
                         {"init", detail::init_tag(cfg.init)}};
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json run{{"seed", r.seed},
                       {"divergence", divergence_tag(r.divergence)},
                       {"file", r.file},
                       {"final_loss", r.trace.rows.back().loss},
                       {"final_max_abs_error", r.trace.rows.back().max_abs_error}};
    if (r.trace.converged_at) {
      run["converged_at"] = *r.trace.converged_at;
    } else {
      run["converged_at"] = nullptr;
    }
    runs.push_back(std::move(run));
  }
  summary["runs"] = std::move(runs);

  auto find_trace = [&](std::uint64_t seed, DivergenceKind kind) -> const TrainingTrace* {
    for (const auto& r : results) {
      if (r.seed == seed && r.divergence.kind == kind) return &r.trace;
    }
    return nullptr;
  };

  if (cfg.experiment == ExperimentKind::head_tail) {
    const int snap = cfg.snapshot_epochs.empty() ? 5 : cfg.snapshot_epochs.front();
    int satisfied = 0;
    int pairs = 0;
    for (std::uint64_t seed : cfg.seeds) {
      const auto* f = find_trace(seed, DivergenceKind::fkl);
      const auto* r = find_trace(seed, DivergenceKind::rkl);
      if (!f || !r || snap >= static_cast<int>(f->rows.size())) continue;
      ++pairs;
      const bool head_ok = f->rows[snap].head_error < r->rows[snap].head_error;
      const bool tail_ok = r->rows[snap].tail_error < f->rows[snap].tail_error;
      if (head_ok && tail_ok) ++satisfied;
    }
    if (pairs > 0) {
      summary["ordering"] = {{"snapshot_epoch", snap},
                             {"pairs", pairs},
                             {"satisfied", satisfied},
                             {"fraction", static_cast<double>(satisfied) / pairs}};
    }
  }

  if (cfg.experiment == ExperimentKind::compare) {
    int satisfied = 0;
    int counted = 0;
    for (std::uint64_t seed : cfg.seeds) {
      const auto* f = find_trace(seed, DivergenceKind::fkl);
      const auto* r = find_trace(seed, DivergenceKind::rkl);
      const auto* a = find_trace(seed, DivergenceKind::akl);
      if (!f || !r || !a) continue;
      ++counted;
      const double worst =
          std::max(f->rows.back().max_abs_error, r->rows.back().max_abs_error);
      if (a->rows.back().max_abs_error <= worst) ++satisfied;
    }
    if (counted > 0) {
      summary["akl_not_worse"] = {{"seeds", counted},
                                  {"satisfied", satisfied},
                                  {"fraction", static_cast<double>(satisfied) / counted}};
    }
  }

  try {
    atomic_write_file(std::filesystem::path(cfg.out_dir) / "summary.json",
                      summary.dump(2) + "\n");
  } catch (const io_error& e) {
    diag << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

}  // namespace akl
