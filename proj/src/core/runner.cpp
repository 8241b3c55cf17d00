#include "runner.hpp"

#include <filesystem>
#include <fstream>
#include <future>

namespace ls::runner {

namespace fs = std::filesystem;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

uint64_t episode_env_seed(uint64_t run_seed, long episode) {
  return splitmix64(run_seed ^ (0xe9150de00000000ULL + uint64_t(episode)));
}

}  // namespace

void save_agent(const trainer::Agent& agent, const std::string& path) {
  num::save_checkpoint(path, {{"model", &agent.model->params()},
                              {"policy", &agent.actor->actor_params()},
                              {"value", &agent.actor->value_params()}});
}

trainer::Agent load_agent(const config::Experiment& exp, const std::string& checkpoint_path,
                          uint64_t run_seed) {
  trainer::Agent agent = trainer::make_agent(exp.model, exp.policy, exp.train, run_seed);
  num::load_checkpoint(checkpoint_path, {{"model", &agent.model->params()},
                                         {"policy", &agent.actor->actor_params()},
                                         {"value", &agent.actor->value_params()}});
  return agent;
}

RunSummary run_training(const config::Experiment& exp, uint64_t run_seed,
                        const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "resolved_config.json").string(), exp.resolved.dump(2) + "\n");

  std::unique_ptr<envs::Environment> env = exp.make_env();
  trainer::Agent agent = trainer::make_agent(exp.model, exp.policy, exp.train, run_seed);
  trainer::ExperienceBuffer buffer;
  trainer::RunMetrics metrics;
  const trainer::TrainConfig& cfg = exp.train;

  trainer::seed_collect(*env, cfg.seed_episodes, cfg, buffer, run_seed, &metrics);

  Rng collect_rng(splitmix64(run_seed ^ 0xc0771ec7ULL));
  Rng train_rng(splitmix64(run_seed ^ 0x7124149ULL));
  long env_steps = long(buffer.steps());
  long total_violations = 0;
  for (const auto& m : metrics.train) total_violations += m.train_violations;

  for (long episode = cfg.seed_episodes; episode < cfg.total_episodes; episode++) {
    srssm::ModelLoss loss = trainer::train_cycle(buffer, agent, cfg, train_rng);

    const bool enabled = cfg.shield_kind != trainer::ShieldKind::None &&
                         trainer::schedule_enabled(cfg.schedule, episode);
    const real eps_now = shield::epsilon_at(cfg.epsilon, env_steps);
    trainer::CollectStats stats = trainer::collect_episode(
        *env, agent, cfg, enabled, eps_now, episode_env_seed(run_seed, episode), collect_rng,
        buffer);
    env_steps += cfg.episode_length;
    total_violations += stats.violations;

    trainer::EpisodeMetrics m;
    m.episode = episode;
    m.phase = enabled ? "shielded" : "unshielded";
    m.train_reward = stats.raw_reward;
    m.train_violations = stats.violations;
    m.interferences = stats.interferences;
    m.model_loss = loss;
    m.epsilon = eps_now;
    metrics.train.push_back(std::move(m));
  }

  // final shielded evaluation (the shield stays active at test time unless
  // the condition has none)
  const bool eval_shield = cfg.shield_kind != trainer::ShieldKind::None;
  metrics.eval = trainer::evaluate(*env, agent, cfg, eval_shield, cfg.eval_episodes,
                                   splitmix64(run_seed ^ 0x7e57ULL));

  write_file((fs::path(out_dir) / "metrics.csv").string(), trainer::metrics_csv(metrics.train));
  write_file((fs::path(out_dir) / "eval.csv").string(), trainer::eval_csv(metrics.eval));
  save_agent(agent, (fs::path(out_dir) / "checkpoint.bin").string());

  RunSummary summary;
  summary.run_dir = out_dir;
  summary.total_training_violations = total_violations;
  if (!metrics.eval.empty()) {
    for (const auto& e : metrics.eval) {
      summary.mean_test_reward += e.reward;
      summary.mean_test_violations += real(e.violations);
    }
    summary.mean_test_reward /= real(metrics.eval.size());
    summary.mean_test_violations /= real(metrics.eval.size());
  }
  return summary;
}

RunSummary run_eval(const config::Experiment& exp, const std::string& checkpoint_path,
                    int episodes, bool shield_on, uint64_t seed, const std::string& out_csv) {
  std::unique_ptr<envs::Environment> env = exp.make_env();
  trainer::Agent agent = load_agent(exp, checkpoint_path, seed);
  std::vector<trainer::EvalEpisode> rows =
      trainer::evaluate(*env, agent, exp.train, shield_on, episodes, seed);
  for (auto& r : rows) r.seed = seed;
  if (!out_csv.empty()) write_file(out_csv, trainer::eval_csv(rows));

  RunSummary summary;
  for (const auto& e : rows) {
    summary.mean_test_reward += e.reward;
    summary.mean_test_violations += real(e.violations);
  }
  if (!rows.empty()) {
    summary.mean_test_reward /= real(rows.size());
    summary.mean_test_violations /= real(rows.size());
  }
  return summary;
}

namespace {

struct ConditionStats {
  std::string name;
  std::vector<real> rewards, violations, train_violations;
};

config::Experiment condition_config(const config::Experiment& base, const std::string& name) {
  // identical budgets; only the shield arrangement differs
  config::json doc = base.resolved;
  if (name == "latent") {
    doc["shield"]["kind"] = "latent";
  } else if (name == "unshielded") {
    doc["shield"]["kind"] = "none";
    doc["trainer"]["intrinsic_punishment"] = false;
  } else if (name == "oracle") {
    doc["shield"]["kind"] = "oracle";
    doc["trainer"]["intrinsic_punishment"] = false;
    doc["trainer"]["schedule"] = {{"kind", "always_on"}};
  } else {
    throw InvalidArgument("unknown condition " + name);
  }
  return config::parse(doc);
}

real mean_of(const std::vector<real>& xs) {
  real s = 0.0;
  for (real x : xs) s += x;
  return xs.empty() ? 0.0 : s / real(xs.size());
}

real std_of(const std::vector<real>& xs) {
  const real m = mean_of(xs);
  real s = 0.0;
  for (real x : xs) s += (x - m) * (x - m);
  return xs.empty() ? 0.0 : std::sqrt(s / real(xs.size()));
}

std::string fmt_num(real v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void run_compare(const config::Experiment& exp, const std::vector<uint64_t>& seeds,
                 const std::string& out_dir, const std::string& out_csv, int threads) {
  check(!seeds.empty(), "compare: need at least one seed");
  const std::vector<std::string> conditions = {"latent", "unshielded", "oracle"};

  struct Job {
    std::string condition;
    uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const std::string& c : conditions)
    for (uint64_t s : seeds) jobs.push_back({c, s});

  std::vector<RunSummary> results(jobs.size());
  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = cursor.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      config::Experiment cond = condition_config(exp, job.condition);
      const std::string dir =
          (fs::path(out_dir) / (job.condition + "-seed" + std::to_string(job.seed))).string();
      results[i] = run_training(cond, job.seed, dir);
    }
  };
  const int n_workers = std::max(1, std::min<int>(threads, int(jobs.size())));
  std::vector<std::future<void>> futures;
  for (int w = 1; w < n_workers; w++) futures.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : futures) f.get();

  std::string csv =
      "condition,test_reward_mean,test_reward_std,test_violations_mean,test_violations_std,"
      "training_violations_mean,training_violations_std\n";
  for (const std::string& c : conditions) {
    ConditionStats stats;
    for (size_t i = 0; i < jobs.size(); i++) {
      if (jobs[i].condition != c) continue;
      stats.rewards.push_back(results[i].mean_test_reward);
      stats.violations.push_back(results[i].mean_test_violations);
      stats.train_violations.push_back(real(results[i].total_training_violations));
    }
    csv += c + "," + fmt_num(mean_of(stats.rewards)) + "," + fmt_num(std_of(stats.rewards)) +
           "," + fmt_num(mean_of(stats.violations)) + "," + fmt_num(std_of(stats.violations)) +
           "," + fmt_num(mean_of(stats.train_violations)) + "," +
           fmt_num(std_of(stats.train_violations)) + "\n";
  }
  fs::create_directories(fs::path(out_csv).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_csv).parent_path());
  write_file(out_csv, csv);
}

void run_render(const config::Experiment& exp, const std::string& checkpoint_or_empty,
                uint64_t seed, int context, int horizon, const std::string& out_dir) {
  check(exp.env_name == "vgw", "render: only the grid world has visual observations");
  check(horizon >= 1, "render: horizon must be >= 1");
  fs::create_directories(out_dir);

  std::unique_ptr<envs::Environment> env = exp.make_env();
  Rng rng(splitmix64(seed ^ 0x4e4d31ULL));

  auto frame_path = [&](const char* kind, int i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03d.ppm", kind, i);
    return (fs::path(out_dir) / buf).string();
  };

  num::Tensor obs = env->reset(seed);
  if (checkpoint_or_empty.empty()) {
    // plain environment rollout under a random policy
    envs::write_ppm(frame_path("frame", 0), obs);
    for (int t = 1; t <= horizon && !env->done(); t++) {
      envs::Action a;
      a.idx = int(rng.bounded(uint64_t(env->n_actions())));
      envs::StepResult step = env->step(a);
      envs::write_ppm(frame_path("frame", t), step.observation);
    }
    return;
  }

  check(context >= 1, "render: need at least one observed context step");
  trainer::Agent agent = load_agent(exp, checkpoint_or_empty, seed);
  const srssm::Srssm& model = *agent.model;

  srssm::CompactLatent latent = model.initial_state();
  num::Tensor zero_action({env->action_dim()});
  latent = model.filter_step(latent, zero_action, obs, rng);
  envs::write_ppm(frame_path("true", 0), obs);
  envs::write_ppm(frame_path("recon", 0), model.decode_observation(latent.feat()));

  std::vector<envs::Action> actions;
  for (int t = 1; t < context + horizon; t++) {
    envs::Action a = agent.actor->act(latent.feat(), false, rng);
    actions.push_back(a);
    if (env->done()) break;
    envs::StepResult step = env->step(a);
    envs::write_ppm(frame_path("true", t), step.observation);
    if (t < context) {
      latent = model.filter_step(latent, env->encode_action(a), step.observation, rng);
      envs::write_ppm(frame_path("recon", t), model.decode_observation(latent.feat()));
    } else {
      // open loop: prior transitions only, decoded for inspection
      num::Graph g;
      num::Var feat = g.input(num::as_row(latent.feat()));
      num::Var act = g.input(num::as_row(env->encode_action(a)));
      num::Var next = model.imagine_step(g, feat, act, rng);
      srssm::CompactLatent imag;
      imag.h = num::Tensor({exp.model.deterministic_size});
      imag.z = num::Tensor({exp.model.stochastic_size});
      const num::Tensor& nv = next.val();
      std::copy(nv.data.begin(), nv.data.begin() + exp.model.deterministic_size,
                imag.h.data.begin());
      std::copy(nv.data.begin() + exp.model.deterministic_size, nv.data.end(),
                imag.z.data.begin());
      latent = imag;
      envs::write_ppm(frame_path("pred", t), model.decode_observation(latent.feat()));
    }
  }
}

}  // namespace ls::runner
