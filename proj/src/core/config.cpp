#include "config.hpp"

#include <fstream>

namespace ls::config {

namespace {

json vgw_defaults() {
  return json{
      {"version", 1},
      {"environment",
       {{"name", "vgw"},
        {"mode", "fixed"},
        {"width", 8},
        {"height", 8},
        {"unsafe_cells", 6},
        {"layout_seed", 0},
        {"render_size", 64}}},
      {"model",
       {{"deterministic_state_size", 200},
        {"stochastic_state_size", 30},
        {"nn_hidden_layer_size", 200},
        {"observation_embedding_size", 1024},
        {"cnn_depth", 32},
        {"bit_depth", 5},
        {"discount_factor", 0.99},
        {"action_repeat", 1},
        {"kl_balancing_ratio", "4:1"},
        {"violation_class_weighting", 3.0},
        {"model_learning_rate", 1e-3},
        {"policy_learning_rate", 8e-5},
        {"value_learning_rate", 8e-5},
        {"adam_epsilon", 1e-7},
        {"adam_beta", json::array({0.9, 0.999})},
        {"exploration_noise_variance", 0.3},
        {"exploration_epsilon", 0.1},
        {"lambda", 0.95},
        {"entropy_weight", 1e-3},
        {"reward_scale", 50.0},
        {"free_nats", 0.0},
        {"grad_clip", 100.0},
        {"min_std", 0.1}}},
      {"shield",
       {{"kind", "latent"},
        {"abps_horizon", 2},
        {"abps_sampled_trajectories", 20},
        {"abps_unsafe_threshold", nullptr},
        {"epsilon_schedule",
         {{"mode", "linear"}, {"start", 0.5}, {"end", 0.125}, {"total_steps", nullptr}}},
        {"action_noise_variance", 0.3},
        {"candidate_bins", json::array({-1.0, -0.1, 0.1, 1.0})},
        {"oracle_draws", 1},
        {"oracle_node_budget", 4000000}}},
      {"trainer",
       {{"seed_episodes", 5},
        {"training_steps", 100},
        {"episode_length", 500},
        {"batch_size", 50},
        {"sequence_length", 50},
        {"imagination_horizon", 15},
        {"total_episodes", 1000},
        {"r_punish", -40.0},
        {"intrinsic_punishment", true},
        {"eval_episodes", 10},
        {"schedule",
         {{"kind", "phased"}, {"phases", json::array({json::array({10, 3}),
                                                      json::array({20, 2}),
                                                      json::array({30, 1})})}}}}},
      {"output_dir", "runs"},
      {"threads", 1}};
}

json cliff_defaults() {
  json d = vgw_defaults();
  d["environment"] = json{{"name", "cliff"},
                          {"p_stick", 0.1},
                          {"start_distance", 10.0}};
  d["model"]["deterministic_state_size"] = 8;
  d["model"]["stochastic_state_size"] = 16;
  d["model"]["nn_hidden_layer_size"] = 16;
  d["model"]["observation_embedding_size"] = 32;
  d["model"]["model_learning_rate"] = 1e-4;
  d["model"]["value_learning_rate"] = 8e-7;
  d["model"]["reward_scale"] = 1.0;
  d["model"]["obs_scale"] = 0.1;
  d["shield"]["abps_horizon"] = 6;
  d["shield"]["abps_sampled_trajectories"] = 10;
  d["shield"]["epsilon_schedule"] = {{"mode", "constant"}, {"value", 0.15}};
  d["shield"]["oracle_draws"] = 8;
  d["trainer"]["seed_episodes"] = 50;
  d["trainer"]["episode_length"] = 20;
  d["trainer"]["batch_size"] = 250;
  d["trainer"]["sequence_length"] = 10;
  d["trainer"]["total_episodes"] = 150;
  d["trainer"]["r_punish"] = -5.0;
  d["trainer"]["schedule"] = {{"kind", "phased"},
                              {"phases", json::array({json::array({60, 1})})}};
  return d;
}

void reject_unknown_keys(const json& user, const json& defaults, const std::string& prefix) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown config key: " + path);
    const json& dv = defaults.at(it.key());
    if (dv.is_object() && it.value().is_object())
      reject_unknown_keys(it.value(), dv, path);
    else if (dv.is_object() && !it.value().is_object())
      throw ConfigError("config key " + path + " must be an object");
  }
}

json merge(const json& defaults, const json& user) {
  json out = defaults;
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (out.contains(it.key()) && out.at(it.key()).is_object() && it.value().is_object())
      out[it.key()] = merge(out.at(it.key()), it.value());
    else
      out[it.key()] = it.value();
  }
  return out;
}

template <class T>
T get(const json& j, const std::string& section, const std::string& key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key " + section + "." + key + ": " + e.what());
  }
}

real parse_kl_ratio(const std::string& text) {
  const size_t colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError("kl_balancing_ratio must look like \"4:1\", got " + text);
  const real a = std::stod(text.substr(0, colon));
  const real b = std::stod(text.substr(colon + 1));
  check(a > 0 && b > 0, "kl_balancing_ratio parts must be positive");
  return a / (a + b);
}

}  // namespace

json default_config(const std::string& env_name) {
  if (env_name == "vgw") return vgw_defaults();
  if (env_name == "cliff") return cliff_defaults();
  throw ConfigError("unknown environment name: " + env_name +
                    " (expected \"vgw\" or \"cliff\")");
}

Experiment parse(const json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  if (!user.contains("version")) throw ConfigError("missing config key: version");
  if (user.at("version") != 1)
    throw ConfigError("unsupported config version: " + user.at("version").dump());
  if (!user.contains("environment") || !user.at("environment").is_object() ||
      !user.at("environment").contains("name"))
    throw ConfigError("missing config key: environment.name");

  const std::string env_name = user.at("environment").at("name").get<std::string>();
  const json defaults = default_config(env_name);
  reject_unknown_keys(user, defaults, "");
  json cfg = merge(defaults, user);

  Experiment exp;
  exp.env_name = env_name;
  exp.resolved = cfg;
  exp.output_dir = cfg.at("output_dir").get<std::string>();
  exp.threads = cfg.at("threads").get<int>();
  check(exp.threads >= 1, "threads must be >= 1");

  // --- trainer ---------------------------------------------------------------
  trainer::TrainConfig& t = exp.train;
  t.seed_episodes = get<int>(cfg, "trainer", "seed_episodes");
  t.train_steps = get<int>(cfg, "trainer", "training_steps");
  t.episode_length = get<int>(cfg, "trainer", "episode_length");
  t.batch_size = get<int>(cfg, "trainer", "batch_size");
  t.sequence_length = get<int>(cfg, "trainer", "sequence_length");
  t.imagination_horizon = get<int>(cfg, "trainer", "imagination_horizon");
  t.total_episodes = get<int>(cfg, "trainer", "total_episodes");
  t.r_punish = get<real>(cfg, "trainer", "r_punish");
  t.intrinsic_punishment = get<bool>(cfg, "trainer", "intrinsic_punishment");
  t.eval_episodes = get<int>(cfg, "trainer", "eval_episodes");
  check(t.seed_episodes >= 1 && t.train_steps >= 0 && t.episode_length >= 1 &&
            t.batch_size >= 1 && t.sequence_length >= 1 && t.imagination_horizon >= 1 &&
            t.total_episodes >= 1 && t.eval_episodes >= 0,
        "trainer values must be positive");
  if (t.sequence_length > t.episode_length + 1)
    throw ConfigError("trainer.sequence_length exceeds episode_length + 1");

  const json& sched = cfg.at("trainer").at("schedule");
  const std::string sched_kind = sched.at("kind").get<std::string>();
  if (sched_kind == "always_off") {
    t.schedule.kind = trainer::ShieldSchedule::Kind::AlwaysOff;
  } else if (sched_kind == "always_on") {
    t.schedule.kind = trainer::ShieldSchedule::Kind::AlwaysOn;
  } else if (sched_kind == "phased") {
    t.schedule.kind = trainer::ShieldSchedule::Kind::Phased;
    for (const json& p : sched.at("phases")) {
      check(p.is_array() && p.size() == 2, "schedule phases must be [episode, cadence] pairs");
      t.schedule.phases.push_back({p.at(0).get<long>(), p.at(1).get<long>()});
    }
    t.schedule.validate();
  } else {
    throw ConfigError("unknown schedule kind: " + sched_kind);
  }

  // --- model -----------------------------------------------------------------
  srssm::ModelConfig& m = exp.model;
  m.deterministic_size = get<int>(cfg, "model", "deterministic_state_size");
  m.stochastic_size = get<int>(cfg, "model", "stochastic_state_size");
  m.hidden_size = get<int>(cfg, "model", "nn_hidden_layer_size");
  m.embed_size = get<int>(cfg, "model", "observation_embedding_size");
  m.cnn_depth = get<int>(cfg, "model", "cnn_depth");
  m.bit_depth = get<int>(cfg, "model", "bit_depth");
  m.violation_weight = get<real>(cfg, "model", "violation_class_weighting");
  m.kl_balance = parse_kl_ratio(get<std::string>(cfg, "model", "kl_balancing_ratio"));
  m.reward_scale = get<real>(cfg, "model", "reward_scale");
  m.free_nats = get<real>(cfg, "model", "free_nats");
  m.min_std = get<real>(cfg, "model", "min_std");
  if (cfg.at("model").contains("obs_scale") && !cfg.at("model").at("obs_scale").is_null())
    m.obs_scale = get<real>(cfg, "model", "obs_scale");
  if (get<int>(cfg, "model", "action_repeat") != 1)
    throw ConfigError("action_repeat must be 1");

  // --- policy ----------------------------------------------------------------
  policy::PolicyConfig& p = exp.policy;
  p.hidden_size = m.hidden_size;
  p.min_std = m.min_std;
  p.discount = get<real>(cfg, "model", "discount_factor");
  p.lambda = get<real>(cfg, "model", "lambda");
  p.entropy_weight = get<real>(cfg, "model", "entropy_weight");
  p.exploration_noise_var = get<real>(cfg, "model", "exploration_noise_variance");
  p.exploration_epsilon = get<real>(cfg, "model", "exploration_epsilon");
  p.policy_lr = get<real>(cfg, "model", "policy_learning_rate");
  p.value_lr = get<real>(cfg, "model", "value_learning_rate");
  p.grad_clip = get<real>(cfg, "model", "grad_clip");

  t.model_lr = get<real>(cfg, "model", "model_learning_rate");
  t.adam_eps = get<real>(cfg, "model", "adam_epsilon");
  const json& betas = cfg.at("model").at("adam_beta");
  check(betas.is_array() && betas.size() == 2, "adam_beta must be [beta1, beta2]");
  t.adam_beta1 = betas.at(0).get<real>();
  t.adam_beta2 = betas.at(1).get<real>();
  t.grad_clip = p.grad_clip;

  // --- shield ----------------------------------------------------------------
  const std::string kind = get<std::string>(cfg, "shield", "kind");
  if (kind == "latent")
    t.shield_kind = trainer::ShieldKind::Latent;
  else if (kind == "oracle")
    t.shield_kind = trainer::ShieldKind::Oracle;
  else if (kind == "none")
    t.shield_kind = trainer::ShieldKind::None;
  else
    throw ConfigError("unknown shield kind: " + kind);

  t.abps.horizon = get<int>(cfg, "shield", "abps_horizon");
  t.abps.samples = get<int>(cfg, "shield", "abps_sampled_trajectories");
  t.abps.action_noise_var = get<real>(cfg, "shield", "action_noise_variance");
  t.oracle.horizon = t.abps.horizon;
  t.oracle.draws = get<int>(cfg, "shield", "oracle_draws");
  t.oracle.node_budget = get<long>(cfg, "shield", "oracle_node_budget");

  const json& eps = cfg.at("shield").at("epsilon_schedule");
  const json& threshold = cfg.at("shield").at("abps_unsafe_threshold");
  if (!threshold.is_null()) {
    // Table 2 scalar shorthand: a constant threshold
    t.epsilon.mode = shield::EpsilonSchedule::Mode::Constant;
    t.epsilon.start = t.epsilon.end = threshold.get<real>();
  } else {
    const std::string mode = eps.at("mode").get<std::string>();
    if (mode == "constant") {
      t.epsilon.mode = shield::EpsilonSchedule::Mode::Constant;
      t.epsilon.start = t.epsilon.end = eps.at("value").get<real>();
    } else if (mode == "linear") {
      t.epsilon.mode = shield::EpsilonSchedule::Mode::Linear;
      t.epsilon.start = eps.at("start").get<real>();
      t.epsilon.end = eps.at("end").get<real>();
      if (eps.contains("total_steps") && !eps.at("total_steps").is_null())
        t.epsilon.total_steps = eps.at("total_steps").get<long>();
      else
        t.epsilon.total_steps = long(t.total_episodes) * t.episode_length;
    } else {
      throw ConfigError("unknown epsilon_schedule mode: " + mode);
    }
  }
  t.epsilon.validate();
  t.abps.epsilon = shield::epsilon_at(t.epsilon, 0);

  // --- environment -----------------------------------------------------------
  if (env_name == "vgw") {
    envs::GridWorldConfig& e = exp.vgw;
    e.width = get<int>(cfg, "environment", "width");
    e.height = get<int>(cfg, "environment", "height");
    e.unsafe_cells = get<int>(cfg, "environment", "unsafe_cells");
    e.layout_seed = get<uint64_t>(cfg, "environment", "layout_seed");
    e.render_size = get<int>(cfg, "environment", "render_size");
    e.episode_length = t.episode_length;
    const std::string mode = get<std::string>(cfg, "environment", "mode");
    if (mode == "fixed")
      e.mode = envs::VgwMode::Fixed;
    else if (mode == "procedural")
      e.mode = envs::VgwMode::Procedural;
    else
      throw ConfigError("unknown vgw mode: " + mode);
    check(e.render_size == 16 || e.render_size == 64,
          "render_size must be 16 or 64 (decoder kernel schedule)");

    m.obs_shape = {3, e.render_size, e.render_size};
    m.action_dim = envs::kVgwActions;
    p.discrete = true;
    p.n_actions = envs::kVgwActions;
    p.action_dim = envs::kVgwActions;
    for (int a = 0; a < envs::kVgwActions; a++) t.abps.candidates.push_back(envs::Action{a, 0.0});
    t.oracle.candidates = t.abps.candidates;

    // the conv stack determines the embedding; the configured value must agree
    srssm::ModelConfig probe = m;
    srssm::Srssm tmp(probe, 0);
    if (tmp.embed_dim() != m.embed_size)
      throw ConfigError("observation_embedding_size " + std::to_string(m.embed_size) +
                        " does not match the conv stack (" + std::to_string(tmp.embed_dim()) +
                        " for render_size " + std::to_string(e.render_size) + ", cnn_depth " +
                        std::to_string(m.cnn_depth) + ")");
  } else {
    envs::CliffConfig& e = exp.cliff;
    e.p_stick = get<real>(cfg, "environment", "p_stick");
    e.start_distance = get<real>(cfg, "environment", "start_distance");
    e.episode_length = t.episode_length;
    m.obs_shape = {2};
    m.action_dim = 1;
    p.discrete = false;
    p.n_actions = 0;
    p.action_dim = 1;
    for (const json& b : cfg.at("shield").at("candidate_bins"))
      t.abps.candidates.push_back(envs::Action{0, b.get<real>()});
    t.oracle.candidates = t.abps.candidates;
  }
  p.feat_dim = m.deterministic_size + m.stochastic_size;

  return exp;
}

Experiment parse_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse(j);
}

Experiment load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_text(text);
}

void set_path(json& doc, const std::string& dotted_key, const std::string& value_text) {
  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // bare words become strings
  }
  json* node = &doc;
  size_t start = 0;
  while (true) {
    const size_t dot = dotted_key.find('.', start);
    const std::string key = dotted_key.substr(start, dot - start);
    if (key.empty()) throw ConfigError("bad override path: " + dotted_key);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError("override path crosses a value: " + dotted_key);
    start = dot + 1;
  }
}

std::unique_ptr<envs::Environment> Experiment::make_env() const {
  if (env_name == "vgw") return std::make_unique<envs::GridWorldEnv>(vgw);
  return std::make_unique<envs::CliffEnv>(cliff);
}

}  // namespace ls::config
