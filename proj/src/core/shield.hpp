#pragma once

#include "envs.hpp"
#include "latent_model.hpp"

namespace ls::shield {

struct ShieldConfig {
  int horizon = 2;            // H
  int samples = 20;           // N
  real epsilon = 0.15;        // interference threshold, in (0,1)
  real action_noise_var = 0.3;  // eta variance for continuous rollouts
  // Candidate actions for pi_alt. Discrete: every action (the proposed one is
  // skipped at evaluation time). Continuous: the BPS bins; the proposed
  // action's negation is appended per call.
  std::vector<envs::Action> candidates;

  void validate() const {
    check(horizon >= 1, "shield: horizon must be >= 1");
    check(samples >= 1, "shield: samples must be >= 1");
    check(epsilon > 0.0 && epsilon < 1.0, "shield: epsilon must be in (0,1)");
  }
};

struct CandidateRisk {
  envs::Action action;
  real risk = 0.0;
};

struct ShieldDecision {
  envs::Action action;
  bool interfered = false;
  real risk = 0.0;                      // estimated risk of the returned action
  std::vector<CandidateRisk> evaluated; // per-candidate risk log, evaluation order
};

// Everything the latent shield needs beyond the model: how to encode actions
// for the model and how the unshielded policy samples rollout actions.
struct LatentShieldContext {
  const model::LatentModel* model = nullptr;
  bool continuous = false;
  std::function<num::Tensor(const envs::Action&)> encode;
  std::function<envs::Action(const num::Tensor& feat, Rng&)> policy;
};

// Monte-Carlo estimate of the probability that a trajectory starting with
// `first_action` (then policy + noise actions) hits a state the violation
// head flags (probability >= 0.5) within H steps. Sample n draws its rng from
// a per-call base split by index, so samples may run in any order.
real estimate_violation_probability(const LatentShieldContext& ctx, const num::Tensor& feat,
                                    const envs::Action& first_action, const ShieldConfig& cfg,
                                    Rng& rng);

// Approximate bounded prescience shielding: accept the proposed action unless
// its estimated risk exceeds epsilon; otherwise try the remaining candidates
// in order and fall back to a uniformly random candidate when none qualifies.
ShieldDecision abps_filter(const LatentShieldContext& ctx, const num::Tensor& feat,
                           const envs::Action& proposed, const ShieldConfig& cfg, Rng& rng);

struct EpsilonSchedule {
  enum class Mode { Constant, Linear };
  Mode mode = Mode::Constant;
  real start = 0.15;       // constant mode uses `start`
  real end = 0.15;
  long total_steps = 1;    // linear mode interpolates over this many steps

  void validate() const {
    check(start > 0.0 && start < 1.0 && end > 0.0 && end < 1.0,
          "epsilon schedule values must be in (0,1)");
    check(total_steps >= 1, "epsilon schedule needs total_steps >= 1");
  }
};

real epsilon_at(const EpsilonSchedule& schedule, long step);

}  // namespace ls::shield
