#include "ovcal/config.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "ovcal/io.hpp"

namespace ovcal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_id_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(ids[i]);
  }
  return out;
}

const char* diversify_name(DiversifyStrategy s) {
  return s == DiversifyStrategy::Random ? "random" : "none";
}

const char* kd_name(KdVariant k) {
  switch (k) {
    case KdVariant::None: return "none";
    case KdVariant::Vanilla: return "vanilla";
    case KdVariant::VisionGuided: return "vision";
    case KdVariant::TextGuided: return "text";
  }
  return "none";
}

const char* teacher_embed_name(TeacherEmbed t) {
  return t == TeacherEmbed::Spatial ? "spatial" : "global";
}

const char* mode_name(GroupMode m) {
  switch (m) {
    case GroupMode::Canonical: return "canonical";
    case GroupMode::GroupAvg: return "groupavg";
    case GroupMode::GroupMax: return "groupmax";
  }
  return "canonical";
}

}  // namespace

void ExperimentConfig::validate() const {
  if (categories < 2) throw ConfigError("categories must be >= 2");
  if (dim < 2) throw ConfigError("dim must be >= 2");
  if (synonyms_min < 1 || synonyms_max < synonyms_min) throw ConfigError("bad synonym count range");
  if (grid_h < 4 || grid_w < 4) throw ConfigError("grid must be at least 4x4");
  if (regions_min < 1 || regions_max < regions_min) throw ConfigError("bad region count range");
  if (train_images < 1 || val_images < 1) throw ConfigError("image counts must be positive");
  if (queries < 1) throw ConfigError("queries must be positive");
  if (queries < regions_max)
    throw ConfigError("need at least as many queries as regions per image");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
  if (weights.mask < 0 || weights.ce < 0 || weights.grounding < 0 || weights.kd < 0)
    throw ConfigError("loss weights must be >= 0");
  if (query_dim != dim)
    throw ConfigError("query_dim must equal dim (pre-projection queries share the teacher space)");
  if (feature_dim != dim)
    throw ConfigError("feature_dim must equal dim (features are painted from teacher tokens)");

  // seen and unseen must partition [0, categories)
  std::vector<int> cover(static_cast<std::size_t>(categories), 0);
  for (int id : seen_ids) {
    if (id < 0 || id >= categories) throw ConfigError("seen id out of range: " + std::to_string(id));
    cover[static_cast<std::size_t>(id)] += 1;
  }
  for (int id : unseen_ids) {
    if (id < 0 || id >= categories) throw ConfigError("unseen id out of range: " + std::to_string(id));
    cover[static_cast<std::size_t>(id)] += 1;
  }
  for (int c = 0; c < categories; ++c) {
    if (cover[static_cast<std::size_t>(c)] == 0)
      throw ConfigError("category " + std::to_string(c) + " is in neither split");
    if (cover[static_cast<std::size_t>(c)] > 1)
      throw ConfigError("category " + std::to_string(c) + " appears in both splits or twice");
  }
  if (seen_ids.empty() || unseen_ids.empty()) throw ConfigError("both splits must be nonempty");
}

TrainSettings ExperimentConfig::train_settings() const {
  TrainSettings s;
  s.weights = weights;
  s.learning_rate = learning_rate;
  s.logit_scale = logit_scale;
  s.grounding_scale = grounding_scale;
  s.tau = temperature;
  s.diversify = diversify;
  s.kd = kd;
  s.teacher_embed = teacher_embed;
  s.seed = seed;
  return s;
}

std::vector<bool> ExperimentConfig::seen_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(categories), false);
  for (int id : seen_ids) mask[static_cast<std::size_t>(id)] = true;
  return mask;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, std::function<void(const std::string&)>> setters;

  auto set_int = [](int& dst) { return [&dst](const std::string& v) { dst = std::stoi(v); }; };
  auto set_double = [](double& dst) { return [&dst](const std::string& v) { dst = std::stod(v); }; };

  setters["seed"] = [&cfg](const std::string& v) { cfg.seed = std::stoull(v); };
  setters["dim"] = set_int(cfg.dim);
  setters["categories"] = set_int(cfg.categories);
  setters["synonyms_min"] = set_int(cfg.synonyms_min);
  setters["synonyms_max"] = set_int(cfg.synonyms_max);
  setters["cone_angle"] = set_double(cfg.cone_angle);
  setters["alignment"] = set_double(cfg.alignment);
  setters["token_noise"] = set_double(cfg.token_noise);
  setters["temperature"] = set_double(cfg.temperature);
  setters["grid_h"] = set_int(cfg.grid_h);
  setters["grid_w"] = set_int(cfg.grid_w);
  setters["regions_min"] = set_int(cfg.regions_min);
  setters["regions_max"] = set_int(cfg.regions_max);
  setters["train_images"] = set_int(cfg.train_images);
  setters["val_images"] = set_int(cfg.val_images);
  setters["seen"] = [&cfg](const std::string& v) { cfg.seen_ids = parse_id_list(v); };
  setters["unseen"] = [&cfg](const std::string& v) { cfg.unseen_ids = parse_id_list(v); };
  setters["queries"] = set_int(cfg.queries);
  setters["query_dim"] = set_int(cfg.query_dim);
  setters["feature_dim"] = set_int(cfg.feature_dim);
  setters["steps"] = set_int(cfg.steps);
  setters["batch_size"] = set_int(cfg.batch_size);
  setters["learning_rate"] = set_double(cfg.learning_rate);
  setters["logit_scale"] = set_double(cfg.logit_scale);
  setters["grounding_scale"] = set_double(cfg.grounding_scale);
  setters["lambda_mask"] = set_double(cfg.weights.mask);
  setters["lambda_ce"] = set_double(cfg.weights.ce);
  setters["lambda_grounding"] = set_double(cfg.weights.grounding);
  setters["lambda_kd"] = set_double(cfg.weights.kd);
  setters["diversify"] = [&cfg](const std::string& v) {
    if (v == "random") cfg.diversify = DiversifyStrategy::Random;
    else if (v == "none") cfg.diversify = DiversifyStrategy::None;
    else throw ConfigError("diversify must be random|none, got '" + v + "'");
  };
  setters["kd"] = [&cfg](const std::string& v) {
    if (v == "none") cfg.kd = KdVariant::None;
    else if (v == "vanilla") cfg.kd = KdVariant::Vanilla;
    else if (v == "vision") cfg.kd = KdVariant::VisionGuided;
    else if (v == "text") cfg.kd = KdVariant::TextGuided;
    else throw ConfigError("kd must be none|vanilla|vision|text, got '" + v + "'");
  };
  setters["teacher_embed"] = [&cfg](const std::string& v) {
    if (v == "spatial") cfg.teacher_embed = TeacherEmbed::Spatial;
    else if (v == "global") cfg.teacher_embed = TeacherEmbed::Global;
    else throw ConfigError("teacher_embed must be spatial|global, got '" + v + "'");
  };
  setters["classify_mode"] = [&cfg](const std::string& v) {
    if (v == "canonical") cfg.classify_mode = GroupMode::Canonical;
    else if (v == "groupavg") cfg.classify_mode = GroupMode::GroupAvg;
    else if (v == "groupmax") cfg.classify_mode = GroupMode::GroupMax;
    else throw ConfigError("classify_mode must be canonical|groupavg|groupmax, got '" + v + "'");
  };

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad value for '" + key + "': '" + value + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("seed", std::to_string(cfg.seed));
  out += "# teacher space\n";
  kv("dim", std::to_string(cfg.dim));
  kv("categories", std::to_string(cfg.categories));
  kv("synonyms_min", std::to_string(cfg.synonyms_min));
  kv("synonyms_max", std::to_string(cfg.synonyms_max));
  kv("cone_angle", fmt_double(cfg.cone_angle));
  kv("alignment", fmt_double(cfg.alignment));
  kv("token_noise", fmt_double(cfg.token_noise));
  kv("temperature", fmt_double(cfg.temperature));
  out += "# dataset\n";
  kv("grid_h", std::to_string(cfg.grid_h));
  kv("grid_w", std::to_string(cfg.grid_w));
  kv("regions_min", std::to_string(cfg.regions_min));
  kv("regions_max", std::to_string(cfg.regions_max));
  kv("train_images", std::to_string(cfg.train_images));
  kv("val_images", std::to_string(cfg.val_images));
  kv("seen", join_ids(cfg.seen_ids));
  kv("unseen", join_ids(cfg.unseen_ids));
  out += "# model\n";
  kv("queries", std::to_string(cfg.queries));
  kv("query_dim", std::to_string(cfg.query_dim));
  kv("feature_dim", std::to_string(cfg.feature_dim));
  out += "# training\n";
  kv("steps", std::to_string(cfg.steps));
  kv("batch_size", std::to_string(cfg.batch_size));
  kv("learning_rate", fmt_double(cfg.learning_rate));
  kv("logit_scale", fmt_double(cfg.logit_scale));
  kv("grounding_scale", fmt_double(cfg.grounding_scale));
  kv("lambda_mask", fmt_double(cfg.weights.mask));
  kv("lambda_ce", fmt_double(cfg.weights.ce));
  kv("lambda_grounding", fmt_double(cfg.weights.grounding));
  kv("lambda_kd", fmt_double(cfg.weights.kd));
  kv("diversify", diversify_name(cfg.diversify));
  kv("kd", kd_name(cfg.kd));
  kv("teacher_embed", teacher_embed_name(cfg.teacher_embed));
  kv("classify_mode", mode_name(cfg.classify_mode));
  return out;
}

}  // namespace ovcal
