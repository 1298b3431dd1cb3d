#include "ovcal/cli.hpp"

#include <cstdio>
#include <filesystem>

#include "ovcal/dataset.hpp"
#include "ovcal/io.hpp"
#include "ovcal/rng.hpp"
#include "ovcal/selfcheck.hpp"

namespace fs = std::filesystem;

namespace ovcal {

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

struct LoadedDataset {
  ExperimentConfig cfg;  // the config the dataset was generated with
  CategoryTable table;
  TeacherSpace space;
};

LoadedDataset load_dataset_context(const std::string& dataset_dir) {
  LoadedDataset out;
  out.cfg = load_config(join(dataset_dir, "config.txt"));
  out.table = read_synonym_table(join(dataset_dir, "synonyms.tsv"));
  out.space = build_teacher(out.table, out.cfg.teacher_params(), out.cfg.seed);
  return out;
}

std::string index_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04zu.%s", prefix, i, ext);
  return buf;
}

}  // namespace

void cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  ensure_dir(out_dir);
  const DatasetBundle data = generate_dataset(cfg);

  write_text_file(join(out_dir, "config.txt"), serialize_config(cfg));
  write_synonym_table(join(out_dir, "synonyms.tsv"), data.table);

  std::vector<Vec> embeds;
  std::vector<std::string> words;
  for (const Category& cat : data.table.entries)
    for (std::size_t s = 0; s < cat.synonyms.size(); ++s) {
      words.push_back(cat.synonyms[s]);
      embeds.push_back(data.space.text(cat.id, static_cast<int>(s)));
    }
  write_embedding_store(join(out_dir, "teacher.emb"), embeds, words);

  write_dataset(join(out_dir, "train.dsb"), data.train);
  write_dataset(join(out_dir, "val.dsb"), data.val);

  std::string manifest;
  manifest += "categories=" + std::to_string(cfg.categories) + "\n";
  std::string seen, unseen;
  for (std::size_t i = 0; i < cfg.seen_ids.size(); ++i)
    seen += (i ? "," : "") + std::to_string(cfg.seen_ids[i]);
  for (std::size_t i = 0; i < cfg.unseen_ids.size(); ++i)
    unseen += (i ? "," : "") + std::to_string(cfg.unseen_ids[i]);
  manifest += "seen=" + seen + "\n";
  manifest += "unseen=" + unseen + "\n";
  for (const Category& cat : data.table.entries)
    manifest += "name." + std::to_string(cat.id) + "=" + cat.canonical + "\n";
  write_text_file(join(out_dir, "split.txt"), manifest);
}

void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir,
               const std::string& out_dir) {
  cfg.validate();
  ensure_dir(out_dir);
  const LoadedDataset ctx = load_dataset_context(dataset_dir);
  if (cfg.dim != ctx.cfg.dim)
    throw ConfigError("training dim " + std::to_string(cfg.dim) +
                      " differs from dataset dim " + std::to_string(ctx.cfg.dim));
  const std::vector<RegionBatch> train = read_dataset(join(dataset_dir, "train.dsb"));
  if (train.empty()) throw IoError("dataset has no training images");

  StudentModel model;
  model.num_queries = cfg.queries;
  model.query_dim = cfg.query_dim;
  model.embed_dim = cfg.dim;
  model.feature_dim = cfg.feature_dim;
  model.init(cfg.seed);

  const TrainSettings settings = cfg.train_settings();
  std::string log = "# step\ttotal\tmask\tce\tgrounding\tkd\n";
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<RegionBatch> minibatch;
    for (int j = 0; j < cfg.batch_size; ++j) {
      const std::size_t idx =
          (static_cast<std::size_t>(step) * static_cast<std::size_t>(cfg.batch_size) +
           static_cast<std::size_t>(j)) %
          train.size();
      minibatch.push_back(train[idx]);
    }
    const LossBreakdown b =
        train_step(model, minibatch, ctx.table, ctx.space, settings, static_cast<uint64_t>(step));
    log += std::to_string(step) + "\t" + fmt_double(b.total) + "\t" + fmt_double(b.mask) + "\t" +
           fmt_double(b.ce) + "\t" + fmt_double(b.grounding) + "\t" + fmt_double(b.kd) + "\n";
  }

  write_checkpoint(join(out_dir, "checkpoint.bin"), model);
  write_text_file(join(out_dir, "loss_log.tsv"), log);
}

EvalOutcome cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
                     const std::string& out_dir) {
  ensure_dir(out_dir);
  const LoadedDataset ctx = load_dataset_context(dataset_dir);
  const std::vector<RegionBatch> val = read_dataset(join(dataset_dir, "val.dsb"));
  if (val.empty()) throw IoError("dataset has no validation images");
  const StudentModel model = read_checkpoint(checkpoint_path);

  ConfusionAccumulator acc(ctx.cfg.categories);
  std::vector<LabelMap> preds, gts;
  for (std::size_t i = 0; i < val.size(); ++i) {
    LabelMap pred = segment_then_classify(model, val[i], ctx.table, ctx.space, ctx.cfg.classify_mode);
    LabelMap gt = gt_label_map(val[i]);
    acc.accumulate(pred, gt);
    write_label_map(join(out_dir, index_name("pred", i, "lbl")), pred);
    write_label_map(join(out_dir, index_name("gt", i, "lbl")), gt);
    preds.push_back(std::move(pred));
    gts.push_back(std::move(gt));
  }
  write_label_video(join(out_dir, "pred.lbv"), preds);
  write_label_video(join(out_dir, "gt.lbv"), gts);

  const MiouResult per_class = miou(acc);
  const std::vector<bool> seen_mask = ctx.cfg.seen_mask();
  const SplitResult split = split_metrics(per_class, seen_mask);
  const VideoEvalResult video = video_eval(preds, gts, ctx.cfg.categories, seen_mask);

  std::string report;
  report += "classes=" + std::to_string(ctx.cfg.categories) + "\n";
  report += "images=" + std::to_string(val.size()) + "\n";
  for (int c = 0; c < ctx.cfg.categories; ++c) {
    if (!per_class.evaluated[static_cast<std::size_t>(c)]) continue;
    report += "per_class_iou." + std::to_string(c) + "=" +
              fmt_double(per_class.iou[static_cast<std::size_t>(c)]) + "\n";
  }
  report += "miou=" + fmt_double(per_class.mean_percent) + "\n";
  report += "seen_miou=" + (split.seen_defined ? fmt_double(split.seen_miou) : "undefined") + "\n";
  report +=
      "unseen_miou=" + (split.unseen_defined ? fmt_double(split.unseen_miou) : "undefined") + "\n";
  report += "harmonic=" + fmt_double(split.harmonic) + "\n";
  report += "video_miou=" + fmt_double(video.per_class.mean_percent) + "\n";
  report += "video_harmonic=" + fmt_double(video.split.harmonic) + "\n";
  write_text_file(join(out_dir, "report.txt"), report);

  EvalOutcome out;
  out.miou_percent = per_class.mean_percent;
  out.seen = split.seen_defined ? split.seen_miou : 0.0;
  out.unseen = split.unseen_defined ? split.unseen_miou : 0.0;
  out.harmonic = split.harmonic;
  return out;
}

void cmd_ablate(const ExperimentConfig& cfg, const std::string& dataset_dir,
                const std::string& out_dir) {
  cfg.validate();
  ensure_dir(out_dir);

  struct Cell {
    const char* name;
    DiversifyStrategy diversify;
    KdVariant kd;
  };
  // 2x2 component grid, then the distillation-variant sweep.
  const Cell cells[] = {
      {"base", DiversifyStrategy::None, KdVariant::None},
      {"td", DiversifyStrategy::Random, KdVariant::None},
      {"tgkd", DiversifyStrategy::None, KdVariant::TextGuided},
      {"td_tgkd", DiversifyStrategy::Random, KdVariant::TextGuided},
      {"kd_none", DiversifyStrategy::None, KdVariant::None},
      {"kd_vanilla", DiversifyStrategy::None, KdVariant::Vanilla},
      {"kd_vision", DiversifyStrategy::None, KdVariant::VisionGuided},
      {"kd_text", DiversifyStrategy::None, KdVariant::TextGuided},
  };

  std::string table = "# cell\tseen\tunseen\tharmonic\n";
  for (const Cell& cell : cells) {
    ExperimentConfig cell_cfg = cfg;
    cell_cfg.diversify = cell.diversify;
    cell_cfg.kd = cell.kd;
    const std::string cell_dir = join(join(out_dir, "cells"), cell.name);
    cmd_train(cell_cfg, dataset_dir, cell_dir);
    const EvalOutcome r = cmd_eval(join(cell_dir, "checkpoint.bin"), dataset_dir, cell_dir);
    table += std::string(cell.name) + "\t" + fmt_double(r.seen) + "\t" + fmt_double(r.unseen) +
             "\t" + fmt_double(r.harmonic) + "\n";
  }
  write_text_file(join(out_dir, "ablation.txt"), table);
}

bool cmd_check_grads(uint64_t seed, int points, std::string* report_text) {
  const GradSuiteReport report = run_gradient_suite(seed, points);
  if (report_text != nullptr) *report_text = format_report(report);
  return report.all_pass();
}

}  // namespace ovcal
