#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ear/bench/task.hpp"
#include "ear/model/config.hpp"
#include "ear/sampling/sampling.hpp"
#include "ear/training/training.hpp"

namespace ear::bench {

/// Flat JSON object reader. Every key read is marked as consumed; finish()
/// rejects whatever is left, so a typo in a sweep script is a hard error.
class ConfigReader {
 public:
  ConfigReader() : doc_(nlohmann::json::object()) {}
  explicit ConfigReader(nlohmann::json doc, std::string origin = "config");
  static ConfigReader from_file(const std::string& path);
  static ConfigReader from_string(const std::string& text, std::string origin = "config");

  bool has(const std::string& key) const { return doc_.contains(key); }

  void read(const std::string& key, double& out);
  /// Also serves 64-bit seeds; size_t is 64 bits wide on supported targets.
  void read(const std::string& key, std::size_t& out);
  void read(const std::string& key, bool& out);
  void read(const std::string& key, std::string& out);
  void read(const std::string& key, std::vector<double>& out);

  /// Throws ConfigError naming every unconsumed key.
  void finish() const;

 private:
  const nlohmann::json& fetch(const std::string& key);

  nlohmann::json doc_;
  std::string origin_;
  std::set<std::string> used_;
};

// Flat key sets. The documented keys are the struct field names; enum
// fields take their string names.
void read_task(ConfigReader& r, TaskSpec& spec);
void read_model(ConfigReader& r, model::ModelConfig& config);
void read_train(ConfigReader& r, training::TrainConfig& config);
void read_sample(ConfigReader& r, sampling::SampleConfig& config);

nlohmann::json to_json(const TaskSpec& spec);
nlohmann::json to_json(const model::ModelConfig& config);
nlohmann::json to_json(const training::TrainConfig& config);
nlohmann::json to_json(const sampling::SampleConfig& config);

TaskSpec task_from_json(const nlohmann::json& j);
model::ModelConfig model_from_json(const nlohmann::json& j);
training::TrainConfig train_from_json(const nlohmann::json& j);

}  // namespace ear::bench
