#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ovcal/train.hpp"

namespace ovcal {

// Full experiment description. Serialized as flat `key = value` lines with
// '#' comments; parsing rejects unknown keys.
struct ExperimentConfig {
  uint64_t seed = 42;

  // teacher space
  int dim = 16;
  int categories = 12;
  int synonyms_min = 2;  // synonym-set sizes including the canonical word
  int synonyms_max = 5;
  double cone_angle = 0.35;
  double alignment = 0.95;
  double token_noise = 0.25;
  double temperature = 1.0;

  // synthetic dataset
  int grid_h = 16;
  int grid_w = 16;
  int regions_min = 2;
  int regions_max = 4;
  int train_images = 64;
  int val_images = 48;
  std::vector<int> seen_ids = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> unseen_ids = {8, 9, 10, 11};

  // student model
  int queries = 20;
  int query_dim = 16;
  int feature_dim = 16;

  // training
  int steps = 3000;
  int batch_size = 4;
  double learning_rate = 0.05;
  double logit_scale = 100.0;
  double grounding_scale = 100.0;
  LossWeights weights;
  DiversifyStrategy diversify = DiversifyStrategy::Random;
  KdVariant kd = KdVariant::TextGuided;
  TeacherEmbed teacher_embed = TeacherEmbed::Spatial;
  GroupMode classify_mode = GroupMode::Canonical;

  void validate() const;

  TeacherParams teacher_params() const {
    return TeacherParams{dim, cone_angle, alignment, token_noise};
  }
  TrainSettings train_settings() const;

  std::vector<bool> seen_mask() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace ovcal
