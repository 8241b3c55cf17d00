#pragma once

#include <json.hpp>  // vendored nlohmann/json

#include "trainer.hpp"

namespace ls::config {

using json = nlohmann::json;

// Fully resolved experiment: environment + model + policy + trainer settings.
// Built from a JSON config validated against per-environment defaults;
// unknown keys are rejected, missing keys fall back to defaults.
struct Experiment {
  std::string env_name;  // "vgw" or "cliff"
  envs::GridWorldConfig vgw;
  envs::CliffConfig cliff;
  srssm::ModelConfig model;
  policy::PolicyConfig policy;
  trainer::TrainConfig train;
  std::string output_dir = "runs";
  int threads = 1;
  json resolved;  // the complete effective config (defaults + overrides)

  std::unique_ptr<envs::Environment> make_env() const;
};

// Default config tree for an environment (full-fidelity hyperparameters).
json default_config(const std::string& env_name);

Experiment parse(const json& user);
Experiment parse_text(const std::string& text);
Experiment load_file(const std::string& path);

// Applies `value_text` (parsed as JSON, with bare-word fallback to string) at
// a dotted path like "trainer.batch_size". The path must exist in the
// document or its defaults.
void set_path(json& doc, const std::string& dotted_key, const std::string& value_text);

}  // namespace ls::config
