// SPDX-License-Identifier: Apache-2.0

// Experiment CLI. Subcommands: converge | head-tail | compare | sequence.
// Flag precedence: built-in defaults < --config file < explicit flags.
// Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 I/O failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "akl/experiment.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::vector<std::string> divergences;
  std::optional<std::string> teacher;
  std::optional<double> mu;
  std::optional<double> lr;
  std::optional<int> epochs;
  std::vector<std::uint64_t> seeds;
  std::vector<int> snapshots;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<int> jobs;
  std::optional<double> tol;
  std::optional<std::string> init;
  std::optional<int> corpus_count;
  std::optional<int> corpus_len;
  std::optional<int> student_order;
};

void add_common_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "key=value experiment config file");
  cmd->add_option("--divergence", flags.divergences,
                  "divergence tag (repeatable): fkl | rkl | fixed_mix[(a)] | akl | akl_r");
  cmd->add_option("--teacher", flags.teacher, "teacher spec file (or model JSON for sequence)");
  cmd->add_option("--mu", flags.mu, "head-mass threshold in (0, 1]");
  cmd->add_option("--lr", flags.lr, "learning rate");
  cmd->add_option("--epochs", flags.epochs, "training epochs");
  cmd->add_option("--seed", flags.seeds, "seed (repeatable)");
  cmd->add_option("--snapshot", flags.snapshots, "snapshot epoch (repeatable)");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--format", flags.format, "output format: csv | json");
  cmd->add_option("--jobs", flags.jobs, "parallel (seed, divergence) cells");
  cmd->add_option("--tol", flags.tol, "convergence tolerance on max|q - p|");
  cmd->add_option("--init", flags.init, "student init: uniform | normal[:sigma]");
  cmd->add_option("--corpus-count", flags.corpus_count, "sequence: corpus size");
  cmd->add_option("--corpus-len", flags.corpus_len, "sequence: tokens per sequence");
  cmd->add_option("--student-order", flags.student_order, "sequence: student context length");
}

akl::ExperimentConfig build_config(akl::ExperimentKind kind, const Flags& flags) {
  akl::ExperimentConfig cfg = akl::default_config(kind);
  if (flags.config) akl::apply_config_file(cfg, *flags.config);
  if (!flags.divergences.empty()) {
    cfg.divergences.clear();
    for (const auto& tag : flags.divergences) {
      cfg.divergences.push_back(akl::parse_divergence_tag(tag));
    }
  }
  if (flags.teacher) cfg.teacher_path = *flags.teacher;
  if (flags.mu) cfg.mu = *flags.mu;
  if (flags.lr) cfg.learning_rate = *flags.lr;
  if (flags.epochs) cfg.epochs = *flags.epochs;
  if (!flags.seeds.empty()) cfg.seeds = flags.seeds;
  if (!flags.snapshots.empty()) cfg.snapshot_epochs = flags.snapshots;
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.format) cfg.format = akl::parse_output_format(*flags.format);
  if (flags.jobs) cfg.jobs = *flags.jobs;
  if (flags.tol) cfg.convergence_tol = *flags.tol;
  if (flags.init) cfg.init = akl::detail::parse_init_tag(*flags.init);
  if (flags.corpus_count) cfg.corpus_count = *flags.corpus_count;
  if (flags.corpus_len) cfg.corpus_len = *flags.corpus_len;
  if (flags.student_order) cfg.student_order = *flags.student_order;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward/reverse/adaptive KL distillation experiments"};
  app.require_subcommand(1);

  Flags flags;
  auto* converge = app.add_subcommand("converge", "train to the teacher and report convergence");
  auto* head_tail =
      app.add_subcommand("head-tail", "compare early head/tail fitting of fkl vs rkl");
  auto* compare = app.add_subcommand("compare", "run all five divergences from one shared init");
  auto* sequence = app.add_subcommand("sequence", "distill a tabular autoregressive model");
  for (auto* cmd : {converge, head_tail, compare, sequence}) add_common_flags(cmd, flags);

  CLI11_PARSE(app, argc, argv);

  akl::ExperimentKind kind = akl::ExperimentKind::converge;
  if (head_tail->parsed()) kind = akl::ExperimentKind::head_tail;
  if (compare->parsed()) kind = akl::ExperimentKind::compare;
  if (sequence->parsed()) kind = akl::ExperimentKind::sequence;

  akl::ResolvedExperiment resolved;
  try {
    resolved = akl::resolve_experiment(build_config(kind, flags));
  } catch (const akl::invalid_input& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    return akl::run_experiment(resolved, std::cerr);
  } catch (const akl::training_failure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const akl::io_error& e) {
    std::cerr << "i/o failure: " << e.what() << '\n';
    return 4;
  }
}
