#include "avec/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace avec {

using nlohmann::json;

std::string inter_anchor_name(InterAnchor a) {
  switch (a) {
    case InterAnchor::original: return "original";
    case InterAnchor::augmented: return "augmented";
    case InterAnchor::equivariant: return "equivariant";
    case InterAnchor::centroid: return "centroid";
  }
  throw std::logic_error("bad anchor enum");
}

InterAnchor inter_anchor_from_name(const std::string& s) {
  if (s == "original") return InterAnchor::original;
  if (s == "augmented") return InterAnchor::augmented;
  if (s == "equivariant") return InterAnchor::equivariant;
  if (s == "centroid") return InterAnchor::centroid;
  throw std::invalid_argument("unknown inter_anchor: " + s);
}

std::string intra_mode_name(IntraMode m) {
  return m == IntraMode::equivariant ? "equivariant" : "invariant";
}

IntraMode intra_mode_from_name(const std::string& s) {
  if (s == "equivariant") return IntraMode::equivariant;
  if (s == "invariant") return IntraMode::invariant;
  throw std::invalid_argument("unknown intra_mode: " + s);
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs == 0 || batch_size == 0 || centroid_samples == 0) {
    throw std::invalid_argument("config: epochs, batch_size and centroid_samples must be positive");
  }
  if (temperature <= 0.0) throw std::invalid_argument("config: temperature must be positive");
  if (weights.inter < 0 || weights.intra_audio < 0 || weights.intra_visual < 0 ||
      (weights.inter == 0 && weights.intra_audio == 0 && weights.intra_visual == 0)) {
    throw std::invalid_argument("config: loss weights must be non-negative with one positive");
  }
  if (init_lr <= 0.0 || peak_lr < init_lr) {
    throw std::invalid_argument("config: need 0 < init_lr <= peak_lr");
  }
  if (warmup_epochs >= epochs) {
    throw std::invalid_argument("config: warmup_epochs must be below epochs");
  }
  if (dataset_classes < 2) {
    throw std::invalid_argument("config: dataset needs at least two classes");
  }
  if (dataset_samples_per_class == 0 || dataset_noise_std < 0.0) {
    throw std::invalid_argument("config: bad dataset settings");
  }
  if (dataset_classes * dataset_samples_per_class < batch_size) {
    throw std::invalid_argument("config: dataset smaller than one batch");
  }
  if (workers == 0) throw std::invalid_argument("config: workers must be positive");
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["centroid_samples"] = c.centroid_samples;
  j["temperature"] = c.temperature;
  j["lambda_inter"] = c.weights.inter;
  j["lambda_intra_audio"] = c.weights.intra_audio;
  j["lambda_intra_visual"] = c.weights.intra_visual;
  j["peak_lr"] = c.peak_lr;
  j["init_lr"] = c.init_lr;
  j["warmup_epochs"] = c.warmup_epochs;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["inter_anchor"] = inter_anchor_name(c.inter_anchor);
  j["intra_mode"] = intra_mode_name(c.intra_mode);
  j["patch_size"] = c.model.patch_size;
  j["embed_dim"] = c.model.embed_dim;
  j["depth"] = c.model.depth;
  j["heads"] = c.model.heads;
  j["mlp_ratio"] = c.model.mlp_ratio;
  j["projection_dim"] = c.model.projection_dim;
  j["layer_norm_eps"] = c.model.layer_norm_eps;
  j["audio_time"] = c.model.audio_time;
  j["audio_freq"] = c.model.audio_freq;
  j["image_size"] = c.model.image_size;
  j["dataset_classes"] = c.dataset_classes;
  j["dataset_samples_per_class"] = c.dataset_samples_per_class;
  j["dataset_noise_std"] = c.dataset_noise_std;
  j["checkpoint_every_epochs"] = c.checkpoint_every_epochs;
  j["workers"] = c.workers;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");

  static const std::set<std::string> known = {
      "seed", "epochs", "batch_size", "centroid_samples", "temperature",
      "lambda_inter", "lambda_intra_audio", "lambda_intra_visual", "peak_lr",
      "init_lr", "warmup_epochs", "weight_decay", "beta1", "beta2", "adam_eps",
      "inter_anchor", "intra_mode", "patch_size", "embed_dim", "depth", "heads",
      "mlp_ratio", "projection_dim", "layer_norm_eps", "audio_time", "audio_freq",
      "image_size", "dataset_classes", "dataset_samples_per_class",
      "dataset_noise_std", "checkpoint_every_epochs", "workers"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("seed", c.seed);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("centroid_samples", c.centroid_samples);
  get("temperature", c.temperature);
  get("lambda_inter", c.weights.inter);
  get("lambda_intra_audio", c.weights.intra_audio);
  get("lambda_intra_visual", c.weights.intra_visual);
  get("peak_lr", c.peak_lr);
  get("init_lr", c.init_lr);
  get("warmup_epochs", c.warmup_epochs);
  get("weight_decay", c.weight_decay);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("adam_eps", c.adam_eps);
  if (j.contains("inter_anchor")) {
    c.inter_anchor = inter_anchor_from_name(j.at("inter_anchor").get<std::string>());
  }
  if (j.contains("intra_mode")) {
    c.intra_mode = intra_mode_from_name(j.at("intra_mode").get<std::string>());
  }
  get("patch_size", c.model.patch_size);
  get("embed_dim", c.model.embed_dim);
  get("depth", c.model.depth);
  get("heads", c.model.heads);
  get("mlp_ratio", c.model.mlp_ratio);
  get("projection_dim", c.model.projection_dim);
  get("layer_norm_eps", c.model.layer_norm_eps);
  get("audio_time", c.model.audio_time);
  get("audio_freq", c.model.audio_freq);
  get("image_size", c.model.image_size);
  get("dataset_classes", c.dataset_classes);
  get("dataset_samples_per_class", c.dataset_samples_per_class);
  get("dataset_noise_std", c.dataset_noise_std);
  get("checkpoint_every_epochs", c.checkpoint_every_epochs);
  get("workers", c.workers);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return train_config_from_json(buf.str());
}

}  // namespace avec
