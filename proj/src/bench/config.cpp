#include "ear/bench/config.hpp"

#include <fstream>
#include <sstream>

#include "ear/common/errors.hpp"

namespace ear::bench {

using nlohmann::json;

static_assert(sizeof(std::size_t) == sizeof(std::uint64_t));

ConfigReader::ConfigReader(json doc, std::string origin)
    : doc_(std::move(doc)), origin_(std::move(origin)) {
  if (!doc_.is_object()) throw ConfigError(origin_ + ": top level must be a JSON object");
}

ConfigReader ConfigReader::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str(), path);
}

ConfigReader ConfigReader::from_string(const std::string& text, std::string origin) {
  try {
    return ConfigReader(json::parse(text), std::move(origin));
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

const json& ConfigReader::fetch(const std::string& key) {
  used_.insert(key);
  return doc_.at(key);
}

void ConfigReader::read(const std::string& key, double& out) {
  if (!has(key)) return;
  const auto& v = fetch(key);
  if (!v.is_number()) throw ConfigError(origin_ + ": '" + key + "' must be a number");
  out = v.get<double>();
}

void ConfigReader::read(const std::string& key, std::size_t& out) {
  if (!has(key)) return;
  const auto& v = fetch(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(origin_ + ": '" + key + "' must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

void ConfigReader::read(const std::string& key, bool& out) {
  if (!has(key)) return;
  const auto& v = fetch(key);
  if (!v.is_boolean()) throw ConfigError(origin_ + ": '" + key + "' must be true or false");
  out = v.get<bool>();
}

void ConfigReader::read(const std::string& key, std::string& out) {
  if (!has(key)) return;
  const auto& v = fetch(key);
  if (!v.is_string()) throw ConfigError(origin_ + ": '" + key + "' must be a string");
  out = v.get<std::string>();
}

void ConfigReader::read(const std::string& key, std::vector<double>& out) {
  if (!has(key)) return;
  const auto& v = fetch(key);
  if (!v.is_array()) throw ConfigError(origin_ + ": '" + key + "' must be an array of numbers");
  out.clear();
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(origin_ + ": '" + key + "' must hold numbers only");
    out.push_back(e.get<double>());
  }
}

void ConfigReader::finish() const {
  std::string unknown;
  for (const auto& [key, value] : doc_.items()) {
    if (used_.count(key)) continue;
    unknown += (unknown.empty() ? "" : ", ") + ("'" + key + "'");
  }
  if (!unknown.empty()) throw ConfigError(origin_ + ": unknown key(s) " + unknown);
}

void read_task(ConfigReader& r, TaskSpec& spec) {
  std::string kind = to_string(spec.kind);
  r.read("task", kind);
  const TaskKind parsed = parse_task_kind(kind);
  if (parsed != spec.kind) {
    spec = parsed == TaskKind::blobs8 ? TaskSpec::blobs8(spec.n_classes, spec.noise_sigma, spec.seed)
                                      : TaskSpec::gmm_chain(8, spec.n_classes, spec.noise_sigma,
                                                            spec.seed);
  }
  r.read("seq_len", spec.seq_len);
  r.read("n_classes", spec.n_classes);
  r.read("noise_sigma", spec.noise_sigma);
  r.read("task_seed", spec.seed);
  spec.validate();
}

void read_model(ConfigReader& r, model::ModelConfig& c) {
  r.read("d_model", c.d_model);
  r.read("n_layers", c.n_layers);
  r.read("n_heads", c.n_heads);
  r.read("ffn_ratio", c.ffn_ratio);
  r.read("d_mlp", c.d_mlp);
  r.read("n_gen_blocks", c.n_gen_blocks);
  r.read("d_noise", c.d_noise);
  r.read("n_class_tokens", c.n_class_tokens);
  r.read("dropout", c.dropout);
  r.read("gmm_components", c.gmm_components);
  r.read("ln_eps", c.ln_eps);
  std::string s;
  if (r.has("noise_kind")) {
    r.read("noise_kind", s);
    c.noise_kind = model::parse_noise_kind(s);
  }
  if (r.has("attention_mode")) {
    r.read("attention_mode", s);
    c.attention_mode = model::parse_attention_mode(s);
  }
  if (r.has("head")) {
    r.read("head", s);
    c.head = model::parse_head_kind(s);
  }
}

void read_train(ConfigReader& r, training::TrainConfig& c) {
  r.read("alpha", c.alpha);
  r.read("tau_train", c.tau_train);
  r.read("final_phase_epochs", c.final_phase_epochs);
  r.read("mask_ratio_lo", c.mask_ratio_lo);
  r.read("mask_ratio_hi", c.mask_ratio_hi);
  r.read("cfg_dropout_p", c.cfg_dropout_p);
  r.read("lr", c.lr);
  r.read("lambda_gen", c.lambda_gen);
  r.read("beta1", c.beta1);
  r.read("beta2", c.beta2);
  r.read("adam_eps", c.adam_eps);
  r.read("weight_decay", c.weight_decay);
  r.read("grad_clip", c.grad_clip);
  r.read("ema_momentum", c.ema_momentum);
  r.read("batch_size", c.batch_size);
  r.read("epochs", c.epochs);
  r.read("warmup_epochs", c.warmup_epochs);
  r.read("seed", c.seed);
  r.read("gaussian_sigma", c.gaussian_sigma);
  r.read("grad_alert", c.grad_alert);
  r.read("checkpoint_every", c.checkpoint_every);
}

void read_sample(ConfigReader& r, sampling::SampleConfig& c) {
  r.read("steps", c.steps);
  r.read("cfg_scale", c.cfg_scale);
  if (r.has("cfg_schedule")) {
    std::string s;
    r.read("cfg_schedule", s);
    c.cfg_schedule = sampling::parse_cfg_schedule(s);
  }
  r.read("tau_infer", c.tau_infer);
  r.read("head_sigma", c.head_sigma);
  r.read("sample_seed", c.seed);
  r.read("order_seed", c.order_seed);
}

json to_json(const TaskSpec& s) {
  return {{"kind", to_string(s.kind)},   {"seq_len", s.seq_len},         {"d_token", s.d_token},
          {"n_classes", s.n_classes},    {"noise_sigma", s.noise_sigma}, {"seed", s.seed}};
}

json to_json(const model::ModelConfig& c) {
  return {{"d_token", c.d_token},
          {"seq_len", c.seq_len},
          {"d_model", c.d_model},
          {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"ffn_ratio", c.ffn_ratio},
          {"d_mlp", c.d_mlp},
          {"n_gen_blocks", c.n_gen_blocks},
          {"d_noise", c.d_noise},
          {"noise_kind", model::to_string(c.noise_kind)},
          {"attention_mode", model::to_string(c.attention_mode)},
          {"n_class_tokens", c.n_class_tokens},
          {"n_classes", c.n_classes},
          {"dropout", c.dropout},
          {"head", model::to_string(c.head)},
          {"gmm_components", c.gmm_components},
          {"ln_eps", c.ln_eps}};
}

json to_json(const training::TrainConfig& c) {
  return {{"alpha", c.alpha},
          {"tau_train", c.tau_train},
          {"final_phase_epochs", c.final_phase_epochs},
          {"mask_ratio_lo", c.mask_ratio_lo},
          {"mask_ratio_hi", c.mask_ratio_hi},
          {"cfg_dropout_p", c.cfg_dropout_p},
          {"lr", c.lr},
          {"lambda_gen", c.lambda_gen},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"weight_decay", c.weight_decay},
          {"grad_clip", c.grad_clip},
          {"ema_momentum", c.ema_momentum},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"warmup_epochs", c.warmup_epochs},
          {"seed", c.seed},
          {"gaussian_sigma", c.gaussian_sigma},
          {"grad_alert", c.grad_alert},
          {"checkpoint_every", c.checkpoint_every}};
}

json to_json(const sampling::SampleConfig& c) {
  return {{"steps", c.steps},
          {"cfg_scale", c.cfg_scale},
          {"cfg_schedule", sampling::to_string(c.cfg_schedule)},
          {"tau_infer", c.tau_infer},
          {"head_sigma", c.head_sigma},
          {"seed", c.seed},
          {"order_seed", c.order_seed}};
}

namespace {

template <class V>
void take(const json& j, const char* key, V& out) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  out = j.at(key).get<V>();
}

}  // namespace

TaskSpec task_from_json(const json& j) {
  TaskSpec s;
  std::string kind;
  try {
    take(j, "kind", kind);
    s.kind = parse_task_kind(kind);
    take(j, "seq_len", s.seq_len);
    take(j, "d_token", s.d_token);
    take(j, "n_classes", s.n_classes);
    take(j, "noise_sigma", s.noise_sigma);
    take(j, "seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("task header: ") + e.what());
  }
  s.validate();
  return s;
}

model::ModelConfig model_from_json(const json& j) {
  model::ModelConfig c;
  std::string noise, mode, head;
  try {
    take(j, "d_token", c.d_token);
    take(j, "seq_len", c.seq_len);
    take(j, "d_model", c.d_model);
    take(j, "n_layers", c.n_layers);
    take(j, "n_heads", c.n_heads);
    take(j, "ffn_ratio", c.ffn_ratio);
    take(j, "d_mlp", c.d_mlp);
    take(j, "n_gen_blocks", c.n_gen_blocks);
    take(j, "d_noise", c.d_noise);
    take(j, "noise_kind", noise);
    take(j, "attention_mode", mode);
    take(j, "n_class_tokens", c.n_class_tokens);
    take(j, "n_classes", c.n_classes);
    take(j, "dropout", c.dropout);
    take(j, "head", head);
    take(j, "gmm_components", c.gmm_components);
    take(j, "ln_eps", c.ln_eps);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model header: ") + e.what());
  }
  c.noise_kind = model::parse_noise_kind(noise);
  c.attention_mode = model::parse_attention_mode(mode);
  c.head = model::parse_head_kind(head);
  c.validate();
  return c;
}

training::TrainConfig train_from_json(const json& j) {
  training::TrainConfig c;
  try {
    take(j, "alpha", c.alpha);
    take(j, "tau_train", c.tau_train);
    take(j, "final_phase_epochs", c.final_phase_epochs);
    take(j, "mask_ratio_lo", c.mask_ratio_lo);
    take(j, "mask_ratio_hi", c.mask_ratio_hi);
    take(j, "cfg_dropout_p", c.cfg_dropout_p);
    take(j, "lr", c.lr);
    take(j, "lambda_gen", c.lambda_gen);
    take(j, "beta1", c.beta1);
    take(j, "beta2", c.beta2);
    take(j, "adam_eps", c.adam_eps);
    take(j, "weight_decay", c.weight_decay);
    take(j, "grad_clip", c.grad_clip);
    take(j, "ema_momentum", c.ema_momentum);
    take(j, "batch_size", c.batch_size);
    take(j, "epochs", c.epochs);
    take(j, "warmup_epochs", c.warmup_epochs);
    take(j, "seed", c.seed);
    take(j, "gaussian_sigma", c.gaussian_sigma);
    take(j, "grad_alert", c.grad_alert);
    take(j, "checkpoint_every", c.checkpoint_every);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train header: ") + e.what());
  }
  return c;
}

}  // namespace ear::bench
