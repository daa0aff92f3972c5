#include "csl/config.hpp"

#include <functional>
#include <map>

#include "json.hpp"

#include "csl/binio.hpp"

namespace csl {

using nlohmann::json;

namespace {

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) {
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::size_t>();
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got " + v.dump());
  }
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' expects a number, got " + v.dump());
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' expects true or false, got " + v.dump());
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' expects a string, got " + v.dump());
  return v.get<std::string>();
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

template <typename F>
Setter count(F field) {
  return [field](RunConfig& c, const json& v, const std::string& k) { field(c) = as_count(v, k); };
}
template <typename F>
Setter real(F field) {
  return [field](RunConfig& c, const json& v, const std::string& k) { field(c) = as_real(v, k); };
}
template <typename F>
Setter flag(F field) {
  return [field](RunConfig& c, const json& v, const std::string& k) { field(c) = as_bool(v, k); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, const json& v, const std::string& k) { c.seed = as_count(v, k); }},
      {"model.variant",
       [](RunConfig& c, const json& v, const std::string& k) { c.model = ModelConfig::preset(as_string(v, k)); }},
      {"model.frames", count([](RunConfig& c) -> std::size_t& { return c.model.frames; })},
      {"model.image", count([](RunConfig& c) -> std::size_t& { return c.model.image; })},
      {"model.patch", count([](RunConfig& c) -> std::size_t& { return c.model.patch; })},
      {"model.d_model", count([](RunConfig& c) -> std::size_t& { return c.model.d_model; })},
      {"model.heads", count([](RunConfig& c) -> std::size_t& { return c.model.heads; })},
      {"model.depth", count([](RunConfig& c) -> std::size_t& { return c.model.depth; })},
      {"model.embed_dim", count([](RunConfig& c) -> std::size_t& { return c.model.embed_dim; })},
      {"model.mlp_ratio", count([](RunConfig& c) -> std::size_t& { return c.model.mlp_ratio; })},
      {"predmae.mask_ratio", real([](RunConfig& c) -> double& { return c.predmae.mask_ratio; })},
      {"predmae.decoder_depth", count([](RunConfig& c) -> std::size_t& { return c.predmae.decoder_depth; })},
      {"predmae.decoder_heads", count([](RunConfig& c) -> std::size_t& { return c.predmae.decoder_heads; })},
      {"predmae.decoder_width", count([](RunConfig& c) -> std::size_t& { return c.predmae.decoder_width; })},
      {"predmae.steps", count([](RunConfig& c) -> std::size_t& { return c.pretrain.steps; })},
      {"predmae.batch", count([](RunConfig& c) -> std::size_t& { return c.pretrain.batch; })},
      {"predmae.base_lr", real([](RunConfig& c) -> double& { return c.pretrain.base_lr; })},
      {"predmae.weight_decay", real([](RunConfig& c) -> double& { return c.pretrain.weight_decay; })},
      {"loss.alpha", real([](RunConfig& c) -> double& { return c.loss.alpha; })},
      {"loss.beta", real([](RunConfig& c) -> double& { return c.loss.beta; })},
      {"loss.lambda", real([](RunConfig& c) -> double& { return c.loss.lambda; })},
      {"loss.epsilon", real([](RunConfig& c) -> double& { return c.loss.epsilon; })},
      {"loss.gamma", real([](RunConfig& c) -> double& { return c.loss.gamma; })},
      {"loss.w1", real([](RunConfig& c) -> double& { return c.loss.w1; })},
      {"loss.w2", real([](RunConfig& c) -> double& { return c.loss.w2; })},
      {"bank.capacity", count([](RunConfig& c) -> std::size_t& { return c.train.bank_capacity; })},
      {"train.steps", count([](RunConfig& c) -> std::size_t& { return c.train.steps; })},
      {"train.batch", count([](RunConfig& c) -> std::size_t& { return c.train.batch; })},
      {"train.base_lr", real([](RunConfig& c) -> double& { return c.train.base_lr; })},
      {"train.weight_decay", real([](RunConfig& c) -> double& { return c.train.weight_decay; })},
      {"train.shotmix_prob", real([](RunConfig& c) -> double& { return c.train.shotmix_prob; })},
      {"train.use_shotmix", flag([](RunConfig& c) -> bool& { return c.train.use_shotmix; })},
      {"train.use_fcs", flag([](RunConfig& c) -> bool& { return c.train.use_fcs; })},
      {"train.augment", flag([](RunConfig& c) -> bool& { return c.train.augment; })},
      {"eval.k", count([](RunConfig& c) -> std::size_t& { return c.eval_k; })},
      {"eval.task",
       [](RunConfig& c, const json& v, const std::string& k) { c.eval_task = parse_task(as_string(v, k)); }},
      {"synth.videos", count([](RunConfig& c) -> std::size_t& { return c.synth.videos; })},
      {"synth.queries", count([](RunConfig& c) -> std::size_t& { return c.synth.queries; })},
      {"synth.train_videos", count([](RunConfig& c) -> std::size_t& { return c.synth.train_videos; })},
      {"synth.image", count([](RunConfig& c) -> std::size_t& { return c.synth.image; })},
  };
  return table;
}

}  // namespace

void RunConfig::finalize() {
  pretrain.seed = seed;
  train.seed = seed;
  model.validate();
  predmae.validate(model);
  loss.validate();
  if (pretrain.batch == 0 || train.batch == 0) throw ConfigError("batch sizes must be positive");
  if (!(train.shotmix_prob >= 0.0 && train.shotmix_prob <= 1.0)) {
    throw ConfigError("train.shotmix_prob must lie in [0,1]");
  }
  if (synth.image != model.image) {
    throw ConfigError("synth.image " + std::to_string(synth.image) + " differs from model.image " +
                      std::to_string(model.image));
  }
}

void apply_config_json(RunConfig& cfg, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object of flat keys");
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    if (!table.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  if (j.contains("model.variant")) table.at("model.variant")(cfg, j["model.variant"], "model.variant");
  for (const auto& [key, value] : j.items()) {
    if (key != "model.variant") table.at(key)(cfg, value, key);
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  RunConfig cfg;
  apply_config_json(cfg, std::string(bytes.begin(), bytes.end()));
  return cfg;
}

std::string config_to_json(const RunConfig& c) {
  json j = {
      {"seed", c.seed},
      {"model.variant", c.model.variant},
      {"model.frames", c.model.frames},
      {"model.image", c.model.image},
      {"model.patch", c.model.patch},
      {"model.d_model", c.model.d_model},
      {"model.heads", c.model.heads},
      {"model.depth", c.model.depth},
      {"model.embed_dim", c.model.embed_dim},
      {"model.mlp_ratio", c.model.mlp_ratio},
      {"predmae.mask_ratio", c.predmae.mask_ratio},
      {"predmae.decoder_depth", c.predmae.decoder_depth},
      {"predmae.decoder_heads", c.predmae.decoder_heads},
      {"predmae.decoder_width", c.predmae.decoder_width},
      {"predmae.steps", c.pretrain.steps},
      {"predmae.batch", c.pretrain.batch},
      {"predmae.base_lr", c.pretrain.base_lr},
      {"predmae.weight_decay", c.pretrain.weight_decay},
      {"loss.alpha", c.loss.alpha},
      {"loss.beta", c.loss.beta},
      {"loss.lambda", c.loss.lambda},
      {"loss.epsilon", c.loss.epsilon},
      {"loss.gamma", c.loss.gamma},
      {"loss.w1", c.loss.w1},
      {"loss.w2", c.loss.w2},
      {"bank.capacity", c.train.bank_capacity},
      {"train.steps", c.train.steps},
      {"train.batch", c.train.batch},
      {"train.base_lr", c.train.base_lr},
      {"train.weight_decay", c.train.weight_decay},
      {"train.shotmix_prob", c.train.shotmix_prob},
      {"train.use_shotmix", c.train.use_shotmix},
      {"train.use_fcs", c.train.use_fcs},
      {"train.augment", c.train.augment},
      {"eval.k", c.eval_k},
      {"eval.task", task_name(c.eval_task)},
      {"synth.videos", c.synth.videos},
      {"synth.queries", c.synth.queries},
      {"synth.train_videos", c.synth.train_videos},
      {"synth.image", c.synth.image},
  };
  return j.dump(2);
}

}  // namespace csl
