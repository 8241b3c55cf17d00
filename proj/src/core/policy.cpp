#include "policy.hpp"

namespace ls::policy {

using namespace ls::num;

std::vector<Var> lambda_returns(const std::vector<Var>& rewards,
                                const std::vector<Var>& values, real discount, real lambda) {
  check(!rewards.empty() && rewards.size() == values.size(),
        "lambda_returns: empty or mismatched inputs");
  const int h = int(rewards.size());
  // rewards[i] and values[i] describe the state reached after i+1 transitions;
  // targets[i] is the return estimate for the state BEFORE transition i+1
  // (targets[0] belongs to the start state):
  //   G[h] = v[h-1],  G[i] = r[i] + gamma * ((1-lambda) v[i] + lambda G[i+1]).
  std::vector<Var> targets{size_t(h), Var{}};
  Var next = values[size_t(h - 1)];
  for (int i = h - 1; i >= 0; i--) {
    Var mix = add(mul_scalar(values[size_t(i)], 1.0 - lambda), mul_scalar(next, lambda));
    targets[size_t(i)] = add(rewards[size_t(i)], mul_scalar(mix, discount));
    next = targets[size_t(i)];
  }
  return targets;
}

ActorCritic::ActorCritic(PolicyConfig cfg, uint64_t param_seed) : cfg_(cfg) {
  check(cfg_.feat_dim > 0, "policy: feat_dim unset");
  Rng arng(splitmix64(param_seed ^ 0xac70ULL));
  Rng vrng(splitmix64(param_seed ^ 0xc417ULL));
  const int out = cfg_.discrete ? cfg_.n_actions : 2;  // logits vs (mean, raw_std)
  actor_net_ = Mlp(actor_params_, "actor", {cfg_.feat_dim, cfg_.hidden_size, cfg_.hidden_size, out},
                   Mlp::Act::Elu, arng);
  value_net_ = Mlp(value_params_, "value", {cfg_.feat_dim, cfg_.hidden_size, cfg_.hidden_size, 1},
                   Mlp::Act::Elu, vrng);
  actor_opt_ = Adam(cfg_.policy_lr);
  value_opt_ = Adam(cfg_.value_lr);
}

Var ActorCritic::actor_forward(Graph& g, Var feats) const { return actor_net_(g, feats); }

Var ActorCritic::value_var(Graph& g, Var feats) const { return value_net_(g, feats); }

real ActorCritic::value(const Tensor& feat) const {
  Graph g;
  return value_net_(g, g.input(as_row(feat))).val().at(0);
}

namespace {

int argmax_row(const Tensor& t) {
  int best = 0;
  for (int j = 1; j < t.dim(1); j++)
    if (t.at(j) > t.at(best)) best = j;
  return best;
}

int sample_categorical(const Tensor& probs, Rng& rng) {
  const real u = rng.uniform();
  real cum = 0.0;
  for (int j = 0; j < probs.dim(1); j++) {
    cum += probs.at(j);
    if (u < cum) return j;
  }
  return probs.dim(1) - 1;
}

}  // namespace

envs::Action ActorCritic::act(const Tensor& feat, bool explore, Rng& rng) const {
  Graph g;
  Var out = actor_forward(g, g.input(as_row(feat)));
  if (cfg_.discrete) {
    envs::Action a;
    if (explore && rng.bernoulli(cfg_.exploration_epsilon)) {
      a.idx = int(rng.bounded(uint64_t(cfg_.n_actions)));
    } else if (explore) {
      a.idx = sample_categorical(softmax_rows(out).val(), rng);
    } else {
      a.idx = argmax_row(out.val());
    }
    return a;
  }
  const real mean = out.val().at(0);
  const real stddev = softplus_val(out.val().at(1)) + cfg_.min_std;
  envs::Action a;
  if (explore) {
    const real pre = mean + stddev * rng.normal();
    const real noise = std::sqrt(cfg_.exploration_noise_var) * rng.normal();
    a.value = std::clamp(std::tanh(pre) + noise, -1.0, 1.0);
  } else {
    a.value = std::tanh(mean);
  }
  return a;
}

envs::Action ActorCritic::sample(const Tensor& feat, Rng& rng) const {
  Graph g;
  Var out = actor_forward(g, g.input(as_row(feat)));
  envs::Action a;
  if (cfg_.discrete) {
    a.idx = sample_categorical(softmax_rows(out).val(), rng);
  } else {
    const real mean = out.val().at(0);
    const real stddev = softplus_val(out.val().at(1)) + cfg_.min_std;
    a.value = std::tanh(mean + stddev * rng.normal());
  }
  return a;
}

Var ActorCritic::act_var(Graph& g, Var feats, Rng& rng) const {
  Var out = actor_forward(g, feats);
  if (cfg_.discrete) return sample_one_hot_st(out, rng);
  Var mean = slice_cols(out, 0, 1);
  Var stddev = add_scalar(softplus(slice_cols(out, 1, 1)), cfg_.min_std);
  Tensor eps = Tensor::randn({feats.val().dim(0), 1}, rng);
  return tanh_(sample_reparam(mean, stddev, eps));
}

Var ActorCritic::entropy_term(Graph& g, Var actor_out) const {
  if (cfg_.discrete) {
    // mean categorical entropy: -sum p log p per row
    Var logp = log_softmax_rows(actor_out);
    Var p = softmax_rows(actor_out);
    Var per_row = neg(row_sum(mul(p, logp)));
    return mean_all(per_row);
  }
  // Gaussian differential entropy up to constants: mean of log std (pre-squash)
  Var stddev = add_scalar(softplus(slice_cols(actor_out, 1, 1)), cfg_.min_std);
  return mean_all(log_(stddev));
  (void)g;
}

UpdateResult ActorCritic::update(const model::LatentModel& model, const Tensor& start_feats,
                                 int horizon, Rng& rng) {
  check(horizon >= 1, "update: horizon must be >= 1");
  check(start_feats.rank() == 2 && start_feats.dim(1) == cfg_.feat_dim,
        "update: start_feats shape mismatch");

  UpdateResult result;
  std::vector<Tensor> imagined_feats;   // detached copies for the critic pass
  std::vector<Tensor> target_values;    // lambda-return values per step

  {
    // Actor pass: gradients flow through sampled actions and model dynamics.
    Graph g;
    Var feat = g.input(start_feats);
    std::vector<Var> rewards, values, entropies;
    for (int i = 0; i < horizon; i++) {
      Var actor_out = actor_forward(g, feat);
      Var action = cfg_.discrete
                       ? sample_one_hot_st(actor_out, rng)
                       : [&]() {
                           Var mean = slice_cols(actor_out, 0, 1);
                           Var stddev = add_scalar(softplus(slice_cols(actor_out, 1, 1)),
                                                   cfg_.min_std);
                           Tensor eps = Tensor::randn({feat.val().dim(0), 1}, rng);
                           return tanh_(sample_reparam(mean, stddev, eps));
                         }();
      entropies.push_back(entropy_term(g, actor_out));
      feat = model.imagine_step(g, feat, action, rng);
      imagined_feats.push_back(feat.val());
      rewards.push_back(model.reward_head(g, feat));
      values.push_back(value_var(g, feat));
    }

    std::vector<Var> targets = lambda_returns(rewards, values, cfg_.discount, cfg_.lambda);
    Var return_sum;
    Var entropy_sum;
    for (int i = 0; i < horizon; i++) {
      Var m = mean_all(targets[size_t(i)]);
      return_sum = i == 0 ? m : add(return_sum, m);
      entropy_sum = i == 0 ? entropies[size_t(i)]
                           : add(entropy_sum, entropies[size_t(i)]);
      target_values.push_back(targets[size_t(i)].val());
    }
    Var mean_return = mul_scalar(return_sum, 1.0 / real(horizon));
    Var mean_entropy = mul_scalar(entropy_sum, 1.0 / real(horizon));
    Var actor_loss = sub(neg(mean_return), mul_scalar(mean_entropy, cfg_.entropy_weight));

    result.actor_loss = actor_loss.val().at(0);
    result.entropy = mean_entropy.val().at(0);
    result.mean_return = mean_return.val().at(0);
    if (!std::isfinite(result.actor_loss))
      throw NumericError("non-finite actor loss");

    g.backward(actor_loss);
    std::vector<Tensor> grads;
    std::vector<Tensor*> params = actor_params_.tensors();
    for (size_t i = 0; i < actor_params_.size(); i++)
      grads.push_back(g.grad_of(actor_params_.item(i).second));
    clip_global_norm(grads, cfg_.grad_clip);
    actor_opt_.step(params, grads);
  }

  {
    // Critic pass on detached states and frozen targets. targets[i] belongs
    // to the state before transition i+1: the start state for i=0, imagined
    // state i-1 afterwards.
    Graph g;
    std::vector<Var> losses;
    for (int i = 0; i < horizon; i++) {
      const Tensor& state = i == 0 ? start_feats : imagined_feats[size_t(i - 1)];
      Var v = value_var(g, g.input(state));
      Var diff = sub(v, g.input(target_values[size_t(i)]));
      losses.push_back(mean_all(square(diff)));
    }
    Var critic_loss;
    for (int i = 0; i < horizon; i++)
      critic_loss = i == 0 ? losses[size_t(i)] : add(critic_loss, losses[size_t(i)]);
    critic_loss = mul_scalar(critic_loss, 0.5 / real(horizon));

    result.critic_loss = critic_loss.val().at(0);
    if (!std::isfinite(result.critic_loss))
      throw NumericError("non-finite critic loss");

    g.backward(critic_loss);
    std::vector<Tensor> grads;
    std::vector<Tensor*> params = value_params_.tensors();
    for (size_t i = 0; i < value_params_.size(); i++)
      grads.push_back(g.grad_of(value_params_.item(i).second));
    clip_global_norm(grads, cfg_.grad_clip);
    value_opt_.step(params, grads);
  }

  return result;
}

}  // namespace ls::policy
