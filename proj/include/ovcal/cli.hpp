#pragma once

#include <string>

#include "ovcal/config.hpp"

namespace ovcal {

// Command implementations shared by the binary and the test suites. Every
// command is a pure function of (config, input files, seed): repeated runs
// write byte-identical artifacts.

/// Emits the dataset directory: config snapshot, synonym table, teacher
/// embedding store (+ sidecar), train/val batches, split manifest.
void cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir);

/// Trains for cfg.steps full-batch gradient steps on the dataset in
/// `dataset_dir`; writes checkpoint.bin and loss_log.tsv into `out_dir`.
void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir,
               const std::string& out_dir);

struct EvalOutcome {
  double miou_percent = 0.0;
  double seen = 0.0;
  double unseen = 0.0;
  double harmonic = 0.0;
};

/// Evaluates a checkpoint on the validation split: writes report.txt,
/// per-image predicted/ground-truth label maps, and the stacked label
/// volumes. The returned summary mirrors the report.
EvalOutcome cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
                     const std::string& out_dir);

/// Runs the 2x2 {diversification, distillation} grid plus the
/// distillation-variant sweep; writes ablation.txt (one row per cell) and
/// per-cell artifacts under out_dir/cells/.
void cmd_ablate(const ExperimentConfig& cfg, const std::string& dataset_dir,
                const std::string& out_dir);

/// Finite-difference gradient audit; returns true when every kernel passes.
bool cmd_check_grads(uint64_t seed, int points, std::string* report_text);

}  // namespace ovcal
