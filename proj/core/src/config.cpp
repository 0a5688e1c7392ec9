#include "hcq/config.hpp"

#include <fstream>
#include <sstream>

namespace hcq {

using nlohmann::json;

void RunConfig::validate() const {
  decoder.validate();
  dataset.scene.validate();
  if (dataset.scene.n_pose != decoder.n_pose) throw ConfigError("dataset.scene.n_pose must equal decoder.n_pose");
  if (dataset.mask_factor == 0 || dataset.scene.image_size % dataset.mask_factor != 0) {
    throw ConfigError("dataset.mask_factor must divide the image size");
  }
  if (dataset.mask_factor != 8) throw ConfigError("dataset.mask_factor must match the 1/8 pixel embedding");
  if (dataset.train_count == 0) throw ConfigError("dataset.train_count must be positive");
  if (optim.batch_size == 0) throw ConfigError("optim.batch_size must be positive");
  if (!(optim.adamw.lr > 0)) throw ConfigError("optim.lr must be positive");
  if (optim.adamw.weight_decay < 0) throw ConfigError("optim.weight_decay must be non-negative");
  if (!(optim.adamw.beta1 >= 0 && optim.adamw.beta1 < 1 && optim.adamw.beta2 >= 0 && optim.adamw.beta2 < 1)) {
    throw ConfigError("optim betas must lie in [0, 1)");
  }
  if (!(optim.adamw.eps > 0)) throw ConfigError("optim.eps must be positive");
  if (loss.cls < 0 || loss.mask < 0 || loss.box < 0 || loss.pose < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (augment.enabled) {
    if (!(augment.min_scale > 0 && augment.min_scale <= augment.max_scale)) {
      throw ConfigError("augment scale range is invalid");
    }
    const auto crop = augment.crop_size ? augment.crop_size : dataset.scene.image_size;
    if (crop % 32 != 0) throw ConfigError("augment.crop_size must be divisible by 32");
  }
  if (score_threshold < 0 || score_threshold > 1) throw ConfigError("score_threshold must lie in [0, 1]");
}

json to_json(const RunConfig& c) {
  const auto& d = c.decoder;
  const auto& s = c.dataset.scene;
  return json{
      {"seed", c.seed},
      {"iterations", c.iterations},
      {"checkpoint_every", c.checkpoint_every},
      {"min_size", c.min_size},
      {"score_threshold", c.score_threshold},
      {"output_dir", c.output_dir},
      {"decoder",
       {{"num_queries", d.num_queries},
        {"num_layers", d.num_layers},
        {"hidden", d.hidden},
        {"heads", d.heads},
        {"points_per_query", d.points_per_query},
        {"keypoint_quota", d.keypoint_quota},
        {"n_pose", d.n_pose},
        {"canonical_space", d.canonical_space},
        {"ffn_dim", d.ffn_dim},
        {"num_levels", d.num_levels},
        {"sine_dim", d.sine_dim},
        {"head_condition", to_string(d.head_condition)}}},
      {"loss",
       {{"cls", c.loss.cls},
        {"mask", c.loss.mask},
        {"box", c.loss.box},
        {"pose", c.loss.pose},
        {"regression", to_string(c.regression)}}},
      {"augment",
       {{"enabled", c.augment.enabled},
        {"min_scale", c.augment.min_scale},
        {"max_scale", c.augment.max_scale},
        {"crop_size", c.augment.crop_size}}},
      {"dataset",
       {{"train_seed", c.dataset.train_seed},
        {"train_count", c.dataset.train_count},
        {"eval_seed", c.dataset.eval_seed},
        {"eval_count", c.dataset.eval_count},
        {"mask_factor", c.dataset.mask_factor},
        {"path", c.dataset.path},
        {"scene",
         {{"image_size", s.image_size},
          {"min_instances", s.min_instances},
          {"max_instances", s.max_instances},
          {"n_pose", s.n_pose},
          {"thickness", s.thickness},
          {"min_figure", s.min_figure},
          {"max_figure", s.max_figure}}}}},
      {"optim",
       {{"lr", c.optim.adamw.lr},
        {"weight_decay", c.optim.adamw.weight_decay},
        {"beta1", c.optim.adamw.beta1},
        {"beta2", c.optim.adamw.beta2},
        {"eps", c.optim.adamw.eps},
        {"clip_norm", c.optim.clip_norm},
        {"batch_size", c.optim.batch_size}}},
  };
}

namespace {

bool compatible(const json& schema, const json& value) {
  if (schema.is_object()) return value.is_object();
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_string()) return value.is_string();
  if (schema.is_number_unsigned()) return value.is_number_unsigned() || (value.is_number_integer() && value.get<long long>() >= 0);
  if (schema.is_number()) return value.is_number();
  return false;
}

// Overlays `user` onto `base`, rejecting keys or types the schema lacks.
void merge_strict(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
    auto& slot = base[it.key()];
    if (!compatible(slot, it.value())) throw ConfigError("config key '" + path + "' has the wrong type");
    if (slot.is_object()) {
      merge_strict(slot, it.value(), path);
    } else if (slot.is_number_float()) {
      slot = it.value().get<double>();
    } else {
      slot = it.value();
    }
  }
}

}  // namespace

RunConfig run_config_from_json(const json& user) {
  json j = to_json(RunConfig{});
  merge_strict(j, user, "");
  RunConfig c;
  try {
    c.seed = j["seed"].get<std::uint64_t>();
    c.iterations = j["iterations"].get<std::size_t>();
    c.checkpoint_every = j["checkpoint_every"].get<std::size_t>();
    c.min_size = j["min_size"].get<std::size_t>();
    c.score_threshold = j["score_threshold"].get<double>();
    c.output_dir = j["output_dir"].get<std::string>();
    const auto& d = j["decoder"];
    c.decoder.num_queries = d["num_queries"].get<std::size_t>();
    c.decoder.num_layers = d["num_layers"].get<std::size_t>();
    c.decoder.hidden = d["hidden"].get<std::size_t>();
    c.decoder.heads = d["heads"].get<std::size_t>();
    c.decoder.points_per_query = d["points_per_query"].get<std::size_t>();
    c.decoder.keypoint_quota = d["keypoint_quota"].get<std::size_t>();
    c.decoder.n_pose = d["n_pose"].get<std::size_t>();
    c.decoder.canonical_space = d["canonical_space"].get<bool>();
    c.decoder.ffn_dim = d["ffn_dim"].get<std::size_t>();
    c.decoder.num_levels = d["num_levels"].get<std::size_t>();
    c.decoder.sine_dim = d["sine_dim"].get<std::size_t>();
    c.decoder.head_condition = parse_head_condition(d["head_condition"].get<std::string>());
    const auto& l = j["loss"];
    c.loss = {l["cls"].get<double>(), l["mask"].get<double>(), l["box"].get<double>(), l["pose"].get<double>()};
    c.regression = parse_regression_loss(l["regression"].get<std::string>());
    const auto& a = j["augment"];
    c.augment = {a["enabled"].get<bool>(), a["min_scale"].get<double>(), a["max_scale"].get<double>(),
                 a["crop_size"].get<std::size_t>()};
    const auto& ds = j["dataset"];
    c.dataset.train_seed = ds["train_seed"].get<std::uint64_t>();
    c.dataset.train_count = ds["train_count"].get<std::size_t>();
    c.dataset.eval_seed = ds["eval_seed"].get<std::uint64_t>();
    c.dataset.eval_count = ds["eval_count"].get<std::size_t>();
    c.dataset.mask_factor = ds["mask_factor"].get<std::size_t>();
    c.dataset.path = ds["path"].get<std::string>();
    const auto& s = ds["scene"];
    c.dataset.scene.image_size = s["image_size"].get<std::size_t>();
    c.dataset.scene.min_instances = s["min_instances"].get<std::size_t>();
    c.dataset.scene.max_instances = s["max_instances"].get<std::size_t>();
    c.dataset.scene.n_pose = s["n_pose"].get<std::size_t>();
    c.dataset.scene.thickness = s["thickness"].get<double>();
    c.dataset.scene.min_figure = s["min_figure"].get<double>();
    c.dataset.scene.max_figure = s["max_figure"].get<double>();
    const auto& o = j["optim"];
    c.optim.adamw = {o["lr"].get<double>(), o["weight_decay"].get<double>(), o["beta1"].get<double>(),
                     o["beta2"].get<double>(), o["eps"].get<double>()};
    c.optim.clip_norm = o["clip_norm"].get<double>();
    c.optim.batch_size = o["batch_size"].get<std::size_t>();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("empty segment in override path '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError("override path '" + path + "' crosses a non-object");
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("malformed config '" + path + "': " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

std::string dump_json(const json& j) { return j.dump(2); }

}  // namespace hcq
