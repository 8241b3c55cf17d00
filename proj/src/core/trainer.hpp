#pragma once

#include "oracle_shield.hpp"
#include "policy.hpp"
#include "srssm.hpp"

namespace ls::trainer {

// Per-step violation labelling realized with the scltl monitor. A violation
// step restarts the monitor on the original formula so later violations in
// the same episode are labelled too; a satisfied specification stays
// discharged for the rest of the episode.
class ViolationTracker {
 public:
  explicit ViolationTracker(scltl::Formula spec)
      : spec_(std::move(spec)), monitor_(spec_) {}

  bool step(const scltl::Valuation& v) {
    if (monitor_.status() == scltl::Status::Satisfied) return false;
    monitor_.step(v);
    if (monitor_.status() == scltl::Status::Unsafe) {
      monitor_ = scltl::Monitor(spec_);
      return true;
    }
    return false;
  }

  const scltl::Monitor& monitor() const { return monitor_; }

 private:
  scltl::Formula spec_;
  scltl::Monitor monitor_;
};

// ---------------------------------------------------------------------------
// Experience buffer
// ---------------------------------------------------------------------------

// Row t of an episode holds the observation after executing actions[t]
// (row 0 is the reset observation with a zero action and zero reward).
struct Episode {
  uint64_t env_seed = 0;
  std::vector<num::Tensor> observations;
  std::vector<num::Tensor> action_encodings;  // [action_dim] each; row 0 is zeros
  std::vector<envs::Action> actions;          // executed actions; [0] unused
  std::vector<real> rewards;                  // stored rewards (post punishment)
  std::vector<real> raw_rewards;              // environment rewards
  std::vector<uint8_t> violations;            // lambda flags
  std::vector<uint8_t> interfered;

  int rows() const { return int(observations.size()); }
};

class ExperienceBuffer {
 public:
  void add(Episode ep) {
    check(ep.rows() >= 1, "empty episode");
    total_steps_ += ep.rows() - 1;
    episodes_.push_back(std::move(ep));
  }

  long episodes() const { return long(episodes_.size()); }
  long steps() const { return total_steps_; }
  const Episode& episode(long i) const { return episodes_[size_t(i)]; }

  long sequences_available(int length) const {
    long n = 0;
    for (const Episode& ep : episodes_)
      if (ep.rows() >= length) n += ep.rows() - length + 1;
    return n;
  }

  // B sequences of exactly L rows, sampled uniformly over valid
  // (episode, offset) pairs; sequences never span episode boundaries.
  srssm::SequenceBatch sample(int batch, int length, int action_dim, Rng& rng) const;

 private:
  std::vector<Episode> episodes_;
  long total_steps_ = 0;
};

// ---------------------------------------------------------------------------
// Shield introduction schedule
// ---------------------------------------------------------------------------

struct ShieldSchedule {
  enum class Kind { AlwaysOff, AlwaysOn, Phased };
  struct Phase {
    long start_episode = 0;
    long cadence = 1;  // enabled every `cadence`-th episode from start_episode
  };
  Kind kind = Kind::AlwaysOff;
  std::vector<Phase> phases;  // strictly increasing start episodes

  void validate() const {
    long prev = -1;
    for (const Phase& p : phases) {
      check(p.cadence >= 1, "schedule cadence must be >= 1");
      check(p.start_episode > prev, "schedule thresholds must be strictly increasing");
      prev = p.start_episode;
    }
  }
};

bool schedule_enabled(const ShieldSchedule& schedule, long episode);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class ShieldKind { None, Latent, Oracle };

struct TrainConfig {
  int seed_episodes = 5;        // S
  int train_steps = 100;        // C
  int episode_length = 500;     // T
  int batch_size = 50;          // B
  int sequence_length = 50;     // L
  int imagination_horizon = 15; // I
  int total_episodes = 100;
  real r_punish = -40.0;
  bool intrinsic_punishment = true;
  real model_lr = 1e-3;
  real adam_eps = 1e-7;
  real adam_beta1 = 0.9;
  real adam_beta2 = 0.999;
  real grad_clip = 100.0;
  int eval_episodes = 10;
  ShieldKind shield_kind = ShieldKind::Latent;
  ShieldSchedule schedule;
  shield::EpsilonSchedule epsilon;
  shield::ShieldConfig abps;
  shield::OracleConfig oracle;
};

struct EpisodeMetrics {
  long episode = 0;
  std::string phase;        // "seed", "unshielded" or "shielded"
  real train_reward = 0.0;  // raw environment reward collected
  long train_violations = 0;
  long interferences = 0;
  srssm::ModelLoss model_loss;
  real epsilon = 0.0;
};

struct EvalEpisode {
  uint64_t seed = 0;
  long episode = 0;
  real reward = 0.0;  // raw environment reward
  long violations = 0;
};

struct RunMetrics {
  std::vector<EpisodeMetrics> train;
  std::vector<EvalEpisode> eval;
};

// The full actor of one run: model + policy + optimizer state.
struct Agent {
  std::unique_ptr<srssm::Srssm> model;
  std::unique_ptr<policy::ActorCritic> actor;
  num::Adam model_opt;
};

Agent make_agent(const srssm::ModelConfig& mcfg, const policy::PolicyConfig& pcfg,
                 const TrainConfig& tcfg, uint64_t run_seed);

// S full episodes under a uniform random policy, violations labelled by the
// monitor.
void seed_collect(envs::Environment& env, int episodes, const TrainConfig& cfg,
                  ExperienceBuffer& buffer, uint64_t run_seed, RunMetrics* metrics);

struct CollectStats {
  real raw_reward = 0.0;
  long violations = 0;
  long interferences = 0;
};

// One environment episode with the current agent: exploration on, shield per
// `shield_enabled`, stored rewards overwritten with r_punish on violation or
// interference steps.
CollectStats collect_episode(envs::Environment& env, Agent& agent, const TrainConfig& cfg,
                             bool shield_enabled, real epsilon_now, uint64_t env_seed,
                             Rng& rng, ExperienceBuffer& buffer);

// C optimisation iterations: model update on sampled sequences, then
// actor-critic updates from imagined trajectories starting at every posterior
// state. Returns loss components averaged over the C steps.
srssm::ModelLoss train_cycle(const ExperienceBuffer& buffer, Agent& agent,
                             const TrainConfig& cfg, Rng& rng);

// Greedy evaluation episodes (no learning, no punishment, raw env rewards);
// the shield is applied when `shield_on`. Episode i uses the rng stream split
// by its index, so results are independent of evaluation order.
std::vector<EvalEpisode> evaluate(envs::Environment& env, Agent& agent, const TrainConfig& cfg,
                                  bool shield_on, int episodes, uint64_t eval_seed);

// Metrics CSV schemas (also the format written by run directories).
std::string metrics_csv(const std::vector<EpisodeMetrics>& rows);
std::string eval_csv(const std::vector<EvalEpisode>& rows);

}  // namespace ls::trainer
