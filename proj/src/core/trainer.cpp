#include "trainer.hpp"

#include <cstdio>

namespace ls::trainer {

using num::Tensor;

// ---------------------------------------------------------------------------
// buffer
// ---------------------------------------------------------------------------

srssm::SequenceBatch ExperienceBuffer::sample(int batch, int length, int action_dim,
                                              Rng& rng) const {
  check(batch >= 1 && length >= 1, "sample: bad batch/length");
  const long available = sequences_available(length);
  check(available >= 1, "insufficient data: no stored episode has " + std::to_string(length) +
                            " rows");

  const long obs_dim = episodes_.front().observations.front().numel();
  srssm::SequenceBatch out;
  out.batch = batch;
  out.length = length;
  out.observations = Tensor({batch * length, int(obs_dim)});
  out.actions = Tensor({batch * length, action_dim});
  out.rewards = Tensor({batch * length});
  out.violations = Tensor({batch * length});

  for (int b = 0; b < batch; b++) {
    // uniform over valid (episode, offset) pairs
    long pick = long(rng.bounded(uint64_t(available)));
    size_t ep_idx = 0;
    long offset = 0;
    for (size_t e = 0; e < episodes_.size(); e++) {
      const long valid = episodes_[e].rows() >= length ? episodes_[e].rows() - length + 1 : 0;
      if (pick < valid) {
        ep_idx = e;
        offset = pick;
        break;
      }
      pick -= valid;
    }
    const Episode& ep = episodes_[ep_idx];
    for (int t = 0; t < length; t++) {
      const long row = long(b) * length + t;
      const long src = offset + t;
      std::memcpy(out.observations.ptr() + row * obs_dim,
                  ep.observations[size_t(src)].ptr(), sizeof(real) * size_t(obs_dim));
      std::memcpy(out.actions.ptr() + row * action_dim,
                  ep.action_encodings[size_t(src)].ptr(), sizeof(real) * size_t(action_dim));
      out.rewards.at(row) = ep.rewards[size_t(src)];
      out.violations.at(row) = ep.violations[size_t(src)];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// schedule
// ---------------------------------------------------------------------------

bool schedule_enabled(const ShieldSchedule& schedule, long episode) {
  check(episode >= 0, "schedule_enabled: negative episode");
  switch (schedule.kind) {
    case ShieldSchedule::Kind::AlwaysOff:
      return false;
    case ShieldSchedule::Kind::AlwaysOn:
      return true;
    case ShieldSchedule::Kind::Phased: {
      schedule.validate();
      const ShieldSchedule::Phase* active = nullptr;
      for (const auto& p : schedule.phases)
        if (episode >= p.start_episode) active = &p;
      if (active == nullptr) return false;  // before the first phase
      return (episode - active->start_episode) % active->cadence == 0;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// agent
// ---------------------------------------------------------------------------

Agent make_agent(const srssm::ModelConfig& mcfg, const policy::PolicyConfig& pcfg,
                 const TrainConfig& tcfg, uint64_t run_seed) {
  Agent agent;
  agent.model = std::make_unique<srssm::Srssm>(mcfg, splitmix64(run_seed ^ 0x11ULL));
  agent.actor = std::make_unique<policy::ActorCritic>(pcfg, splitmix64(run_seed ^ 0x22ULL));
  agent.model_opt = num::Adam(tcfg.model_lr, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps);
  return agent;
}

// ---------------------------------------------------------------------------
// episodes
// ---------------------------------------------------------------------------

namespace {

shield::LatentShieldContext make_shield_context(envs::Environment& env, Agent& agent) {
  shield::LatentShieldContext ctx;
  ctx.model = agent.model.get();
  ctx.continuous = !env.discrete();
  ctx.encode = [&env](const envs::Action& a) { return env.encode_action(a); };
  ctx.policy = [actor = agent.actor.get()](const Tensor& feat, Rng& r) {
    return actor->sample(feat, r);
  };
  return ctx;
}

struct EpisodeRun {
  Episode episode;
  CollectStats stats;
};

struct EpisodeOptions {
  bool explore = true;
  bool punish = true;
  bool shield_enabled = false;
  real epsilon = 0.15;
};

EpisodeRun run_episode(envs::Environment& env, Agent& agent, const TrainConfig& cfg,
                       const EpisodeOptions& opt, uint64_t env_seed, Rng& rng) {
  EpisodeRun out;
  Episode& ep = out.episode;
  ep.env_seed = env_seed;

  Tensor obs = env.reset(env_seed);
  ViolationTracker tracker(env.safety_spec());
  const Tensor zero_action({env.action_dim()});

  srssm::CompactLatent latent = agent.model->initial_state();
  latent = agent.model->filter_step(latent, zero_action, obs, rng);

  ep.observations.push_back(obs);
  ep.action_encodings.push_back(zero_action);
  ep.actions.push_back(envs::Action{});
  ep.rewards.push_back(0.0);
  ep.raw_rewards.push_back(0.0);
  ep.violations.push_back(0);
  ep.interfered.push_back(0);

  shield::LatentShieldContext shield_ctx;
  shield::ShieldConfig abps_cfg = cfg.abps;
  abps_cfg.epsilon = opt.epsilon;
  if (opt.shield_enabled && cfg.shield_kind == ShieldKind::Latent)
    shield_ctx = make_shield_context(env, agent);

  for (int t = 1; t <= cfg.episode_length && !env.done(); t++) {
    const Tensor feat = latent.feat();
    envs::Action proposed = agent.actor->act(feat, opt.explore, rng);

    envs::Action executed = proposed;
    bool interfered = false;
    if (opt.shield_enabled && cfg.shield_kind == ShieldKind::Latent) {
      shield::ShieldDecision d = shield::abps_filter(shield_ctx, feat, proposed, abps_cfg, rng);
      executed = d.action;
      interfered = d.interfered;
    } else if (opt.shield_enabled && cfg.shield_kind == ShieldKind::Oracle) {
      shield::ShieldDecision d =
          shield::oracle_bps_filter(env, tracker.monitor(), proposed, cfg.oracle, rng);
      executed = d.action;
      interfered = d.interfered;
    }

    envs::StepResult step = env.step(executed);
    const bool violation = tracker.step(step.valuation);
    const real raw = step.reward;
    const real stored =
        (opt.punish && (violation || interfered)) ? cfg.r_punish : raw;

    ep.observations.push_back(step.observation);
    ep.action_encodings.push_back(env.encode_action(executed));
    ep.actions.push_back(executed);
    ep.rewards.push_back(stored);
    ep.raw_rewards.push_back(raw);
    ep.violations.push_back(violation ? 1 : 0);
    ep.interfered.push_back(interfered ? 1 : 0);

    out.stats.raw_reward += raw;
    out.stats.violations += violation ? 1 : 0;
    out.stats.interferences += interfered ? 1 : 0;

    latent = agent.model->filter_step(latent, ep.action_encodings.back(), step.observation, rng);
  }
  return out;
}

}  // namespace

void seed_collect(envs::Environment& env, int episodes, const TrainConfig& cfg,
                  ExperienceBuffer& buffer, uint64_t run_seed, RunMetrics* metrics) {
  check(episodes >= 1, "seed_collect: need at least one episode");
  Rng rng(splitmix64(run_seed ^ 0x5eedULL));
  for (int e = 0; e < episodes; e++) {
    const uint64_t env_seed = splitmix64(run_seed ^ (0xe900000000ULL + uint64_t(e)));
    Episode ep;
    ep.env_seed = env_seed;
    Tensor obs = env.reset(env_seed);
    ViolationTracker tracker(env.safety_spec());
    const Tensor zero_action({env.action_dim()});
    ep.observations.push_back(obs);
    ep.action_encodings.push_back(zero_action);
    ep.actions.push_back(envs::Action{});
    ep.rewards.push_back(0.0);
    ep.raw_rewards.push_back(0.0);
    ep.violations.push_back(0);
    ep.interfered.push_back(0);

    CollectStats stats;
    for (int t = 1; t <= cfg.episode_length && !env.done(); t++) {
      envs::Action a;
      if (env.discrete())
        a.idx = int(rng.bounded(uint64_t(env.n_actions())));
      else
        a.value = rng.uniform(-1.0, 1.0);
      envs::StepResult step = env.step(a);
      const bool violation = tracker.step(step.valuation);
      const real stored = (cfg.intrinsic_punishment && violation) ? cfg.r_punish : step.reward;
      ep.observations.push_back(step.observation);
      ep.action_encodings.push_back(env.encode_action(a));
      ep.actions.push_back(a);
      ep.rewards.push_back(stored);
      ep.raw_rewards.push_back(step.reward);
      ep.violations.push_back(violation ? 1 : 0);
      ep.interfered.push_back(0);
      stats.raw_reward += step.reward;
      stats.violations += violation ? 1 : 0;
    }
    buffer.add(std::move(ep));
    if (metrics != nullptr) {
      EpisodeMetrics m;
      m.episode = long(metrics->train.size());
      m.phase = "seed";
      m.train_reward = stats.raw_reward;
      m.train_violations = stats.violations;
      m.epsilon = 0.0;
      metrics->train.push_back(std::move(m));
    }
  }
}

CollectStats collect_episode(envs::Environment& env, Agent& agent, const TrainConfig& cfg,
                             bool shield_enabled, real epsilon_now, uint64_t env_seed,
                             Rng& rng, ExperienceBuffer& buffer) {
  EpisodeOptions opt;
  opt.explore = true;
  opt.punish = cfg.intrinsic_punishment;
  opt.shield_enabled = shield_enabled;
  opt.epsilon = epsilon_now;
  EpisodeRun run = run_episode(env, agent, cfg, opt, env_seed, rng);
  buffer.add(std::move(run.episode));
  return run.stats;
}

srssm::ModelLoss train_cycle(const ExperienceBuffer& buffer, Agent& agent,
                             const TrainConfig& cfg, Rng& rng) {
  check(buffer.sequences_available(cfg.sequence_length) >= 1,
        "train_cycle: insufficient data for sequence length " +
            std::to_string(cfg.sequence_length));
  srssm::ModelLoss avg;
  if (cfg.train_steps == 0) return avg;

  for (int c = 0; c < cfg.train_steps; c++) {
    srssm::SequenceBatch batch =
        buffer.sample(cfg.batch_size, cfg.sequence_length, agent.model->action_dim(), rng);

    num::Graph g;
    srssm::ObserveResult obs = agent.model->observe_sequence(g, batch, rng);
    g.backward(obs.total);

    num::ParamStore& params = agent.model->params();
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (size_t i = 0; i < params.size(); i++) grads.push_back(g.grad_of(params.item(i).second));
    num::clip_global_norm(grads, cfg.grad_clip);
    agent.model_opt.step(params.tensors(), grads);

    agent.actor->update(*agent.model, obs.posterior_feats, cfg.imagination_horizon, rng);

    avg.observation += obs.loss.observation;
    avg.reward += obs.loss.reward;
    avg.kl += obs.loss.kl;
    avg.violation += obs.loss.violation;
    avg.total += obs.loss.total;
  }
  const real inv = 1.0 / real(cfg.train_steps);
  avg.observation *= inv;
  avg.reward *= inv;
  avg.kl *= inv;
  avg.violation *= inv;
  avg.total *= inv;
  return avg;
}

std::vector<EvalEpisode> evaluate(envs::Environment& env, Agent& agent, const TrainConfig& cfg,
                                  bool shield_on, int episodes, uint64_t eval_seed) {
  std::vector<EvalEpisode> out;
  Rng base(splitmix64(eval_seed ^ 0xe7a1ULL));
  for (int e = 0; e < episodes; e++) {
    Rng ep_rng = base.split(uint64_t(e));  // order-independent per-episode stream
    EpisodeOptions opt;
    opt.explore = false;
    opt.punish = false;
    opt.shield_enabled = shield_on;
    opt.epsilon = cfg.abps.epsilon;
    const uint64_t env_seed = splitmix64(eval_seed ^ (0xa770000000ULL + uint64_t(e)));
    EpisodeRun run = run_episode(env, agent, cfg, opt, env_seed, ep_rng);
    EvalEpisode row;
    row.seed = eval_seed;
    row.episode = e;
    row.reward = run.stats.raw_reward;
    row.violations = run.stats.violations;
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string fmt(real v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string metrics_csv(const std::vector<EpisodeMetrics>& rows) {
  std::string out =
      "episode,phase,train_reward,train_violations,interferences,model_loss,obs_loss,"
      "reward_loss,kl_loss,violation_loss,epsilon\n";
  for (const EpisodeMetrics& m : rows) {
    out += std::to_string(m.episode) + "," + m.phase + "," + fmt(m.train_reward) + "," +
           std::to_string(m.train_violations) + "," + std::to_string(m.interferences) + "," +
           fmt(m.model_loss.total) + "," + fmt(m.model_loss.observation) + "," +
           fmt(m.model_loss.reward) + "," + fmt(m.model_loss.kl) + "," +
           fmt(m.model_loss.violation) + "," + fmt(m.epsilon) + "\n";
  }
  return out;
}

std::string eval_csv(const std::vector<EvalEpisode>& rows) {
  std::string out = "seed,episode,test_reward,test_violations\n";
  real sum_r = 0.0, sum_v = 0.0;
  for (const EvalEpisode& e : rows) {
    out += std::to_string(e.seed) + "," + std::to_string(e.episode) + "," + fmt(e.reward) +
           "," + std::to_string(e.violations) + "\n";
    sum_r += e.reward;
    sum_v += real(e.violations);
  }
  const real n = rows.empty() ? 1.0 : real(rows.size());
  const real mean_r = sum_r / n, mean_v = sum_v / n;
  real var_r = 0.0, var_v = 0.0;
  for (const EvalEpisode& e : rows) {
    var_r += (e.reward - mean_r) * (e.reward - mean_r);
    var_v += (real(e.violations) - mean_v) * (real(e.violations) - mean_v);
  }
  var_r /= n;
  var_v /= n;
  if (rows.empty()) {
    out += "mean,,0,0\nstd,,0,0\n";
  } else {
    out += "mean,," + fmt(mean_r) + "," + fmt(mean_v) + "\n";
    out += "std,," + fmt(std::sqrt(var_r)) + "," + fmt(std::sqrt(var_v)) + "\n";
  }
  return out;
}

}  // namespace ls::trainer
