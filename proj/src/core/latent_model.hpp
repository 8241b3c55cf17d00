#pragma once

#include <functional>

#include "graph.hpp"

namespace ls::model {

// What imagination-based consumers (shields, actor-critic) need from a world
// model: rolling compact latent states forward without observations and
// reading the reward / violation heads. Feature vectors are [n, feat_dim]
// batches; actions are [n, action_dim] encodings (one-hot or raw).
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  virtual int feat_dim() const = 0;
  virtual int action_dim() const = 0;

  // One prior-sampled latent transition. Differentiable in feat and action.
  virtual num::Var imagine_step(num::Graph& g, num::Var feat, num::Var action,
                                Rng& rng) const = 0;

  // Predicted (scaled) reward, shape [n,1].
  virtual num::Var reward_head(num::Graph& g, num::Var feat) const = 0;

  // Violation logit, shape [n,1]; probability is sigmoid of this.
  virtual num::Var violation_logit(num::Graph& g, num::Var feat) const = 0;
};

// Differentiable action source for imagination rollouts: maps batched
// features to batched action encodings, sampling with `rng`.
using PolicyFn = std::function<num::Var(num::Graph&, num::Var feat, Rng&)>;

// One imagined trajectory bundle: index i holds state i+1 steps after the
// start (rewards/violations are evaluated at imagined states only).
struct ImaginedTrajectory {
  std::vector<num::Var> feats;
  std::vector<num::Var> actions;          // action taken to reach feats[i]
  std::vector<num::Var> rewards;          // reward head at feats[i]
  std::vector<num::Var> violation_probs;  // sigmoid of violation head at feats[i]
};

// Rolls `horizon` prior transitions from `start` ([n, feat_dim]). The first
// action is `first_action` when given, otherwise drawn from `policy`;
// subsequent actions always come from `policy`. Gaussian noise with variance
// `action_noise_var` perturbs continuous actions when positive (clamped to
// [-1, 1]). No observations are consulted anywhere.
ImaginedTrajectory imagine(num::Graph& g, const LatentModel& model, num::Var start,
                           const PolicyFn& policy, int horizon, real action_noise_var,
                           Rng& rng, const num::Tensor* first_action = nullptr);

}  // namespace ls::model
