#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "ovcal/cli.hpp"

namespace {

ovcal::ExperimentConfig load_or_default(const std::string& config_path, bool seed_set,
                                        uint64_t seed) {
  ovcal::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = ovcal::load_config(config_path);
  if (seed_set) cfg.seed = seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic open-vocabulary segmentation calibration experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dataset_dir, checkpoint_path;
  uint64_t seed = 0;
  bool seed_set = false;
  auto add_common = [&](CLI::App* cmd, bool needs_out, bool needs_dataset, bool needs_ckpt) {
    cmd->add_option("--config", config_path, "experiment config file");
    cmd->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      seed_set = true;
    });
    if (needs_out) cmd->add_option("--out", out_dir, "output directory")->required();
    if (needs_dataset)
      cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
    if (needs_ckpt)
      cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, true, false, false);
  CLI::App* train = app.add_subcommand("train", "train the toy student model");
  add_common(train, true, true, false);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the validation split");
  add_common(eval, true, true, true);
  CLI::App* ablate = app.add_subcommand("ablate", "run the component and distillation sweeps");
  add_common(ablate, true, true, false);
  CLI::App* check = app.add_subcommand("check-grads", "finite-difference gradient audit");
  check->add_option("--seed", seed, "suite seed")->each([&](const std::string&) { seed_set = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ovcal::cmd_gen(load_or_default(config_path, seed_set, seed), out_dir);
    } else if (train->parsed()) {
      ovcal::cmd_train(load_or_default(config_path, seed_set, seed), dataset_dir, out_dir);
    } else if (eval->parsed()) {
      const ovcal::EvalOutcome r = ovcal::cmd_eval(checkpoint_path, dataset_dir, out_dir);
      std::printf("miou=%.4f seen=%.4f unseen=%.4f harmonic=%.4f\n", r.miou_percent, r.seen,
                  r.unseen, r.harmonic);
    } else if (ablate->parsed()) {
      ovcal::cmd_ablate(load_or_default(config_path, seed_set, seed), dataset_dir, out_dir);
    } else if (check->parsed()) {
      std::string report;
      const bool ok = ovcal::cmd_check_grads(seed_set ? seed : 20240101ull, 100, &report);
      std::fputs(report.c_str(), stdout);
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
