#pragma once

#include "adam.hpp"
#include "envs.hpp"
#include "latent_model.hpp"

namespace ls::policy {

struct PolicyConfig {
  bool discrete = true;
  int n_actions = 5;   // discrete
  int action_dim = 5;  // encoding width (1 for continuous)
  int feat_dim = 0;
  int hidden_size = 200;
  real min_std = 0.1;
  real exploration_epsilon = 0.1;      // uniform mixing for discrete exploration
  real exploration_noise_var = 0.3;    // Gaussian action noise for continuous
  real discount = 0.99;                // gamma
  real lambda = 0.95;
  real entropy_weight = 1e-3;
  real policy_lr = 8e-5;
  real value_lr = 8e-5;
  real grad_clip = 100.0;
};

struct UpdateResult {
  real actor_loss = 0.0;
  real critic_loss = 0.0;
  real entropy = 0.0;
  real mean_return = 0.0;
};

// TD(lambda) return targets over an imagined segment. rewards[i] and
// values[i] belong to the state reached after i+1 transitions; values0 is the
// critic at the start state. Targets G[i] estimate the return from state i of
// the extended sequence (start state = index 0):
//   G[last] = v(last), G[i] = r[i+1] + gamma * ((1-lambda) v[i+1] + lambda G[i+1]).
std::vector<num::Var> lambda_returns(const std::vector<num::Var>& rewards,
                                     const std::vector<num::Var>& values, real discount,
                                     real lambda);

class ActorCritic {
 public:
  ActorCritic(PolicyConfig cfg, uint64_t param_seed);

  const PolicyConfig& config() const { return cfg_; }
  num::ParamStore& actor_params() { return actor_params_; }
  num::ParamStore& value_params() { return value_params_; }

  // Concrete action for environment interaction. Deterministic (mode action)
  // when explore is false; sampled with exploration noise when true.
  envs::Action act(const num::Tensor& feat, bool explore, Rng& rng) const;

  // Sampled action for shield trajectory rollouts (no exploration mixing).
  envs::Action sample(const num::Tensor& feat, Rng& rng) const;

  // Differentiable sampled action encodings [n, action_dim] used inside
  // imagination: straight-through one-hot for discrete actions, tanh-squashed
  // reparameterised Gaussian for continuous ones.
  num::Var act_var(num::Graph& g, num::Var feats, Rng& rng) const;

  num::Var value_var(num::Graph& g, num::Var feats) const;
  real value(const num::Tensor& feat) const;

  // One actor-critic update from imagined trajectories starting at
  // `start_feats` [n, feat]: the actor ascends lambda-returns backpropagated
  // through the model dynamics plus an entropy bonus; the critic regresses
  // the same targets on detached states. Throws NumericError on non-finite
  // losses.
  UpdateResult update(const model::LatentModel& model, const num::Tensor& start_feats,
                      int horizon, Rng& rng);

 private:
  num::Var actor_forward(num::Graph& g, num::Var feats) const;  // logits or packed mean/std
  num::Var entropy_term(num::Graph& g, num::Var actor_out) const;

  PolicyConfig cfg_;
  num::ParamStore actor_params_, value_params_;
  num::Mlp actor_net_, value_net_;
  num::Adam actor_opt_, value_opt_;
};

}  // namespace ls::policy
