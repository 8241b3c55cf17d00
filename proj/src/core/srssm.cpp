#include "srssm.hpp"

namespace ls::srssm {

using namespace ls::num;

Srssm::Srssm(ModelConfig cfg, uint64_t param_seed) : cfg_(cfg) {
  check(cfg_.deterministic_size >= 1 && cfg_.stochastic_size >= 1, "bad state sizes");
  Rng rng(splitmix64(param_seed ^ 0x535253534dULL));
  const int dh = cfg_.deterministic_size;
  const int dz = cfg_.stochastic_size;
  const int hidden = cfg_.hidden_size;
  const int feat = dh + dz;

  if (cfg_.image_obs()) {
    const int size = cfg_.obs_shape[1];
    conv_enc_ = ConvEncoder(params_, "enc", cfg_.obs_shape[0], size, cfg_.cnn_depth, rng);
    embed_dim_ = conv_enc_.embed_dim();
    conv_dec_ = ConvDecoder(params_, "dec", feat, cfg_.obs_shape[0], size, cfg_.cnn_depth, rng);
  } else {
    const int obs_dim = cfg_.obs_shape[0];
    embed_dim_ = cfg_.embed_size;
    // three fully connected hidden layers with rectified activations
    vec_enc_ = Mlp(params_, "enc", {obs_dim, hidden, hidden, hidden, embed_dim_},
                   Mlp::Act::Relu, rng);
    vec_dec_ = Mlp(params_, "dec", {feat, hidden, hidden, hidden, obs_dim}, Mlp::Act::Relu,
                   rng);
  }

  rnn_in_ = Mlp(params_, "rnn_in", {dz + cfg_.action_dim, hidden}, Mlp::Act::Elu, rng);
  gru_ = GruCell(params_, "gru", hidden, dh, rng);
  prior_net_ = Mlp(params_, "prior", {dh, hidden, 2 * dz}, Mlp::Act::Elu, rng);
  posterior_net_ = Mlp(params_, "posterior", {dh + embed_dim_, hidden, 2 * dz}, Mlp::Act::Elu,
                       rng);
  reward_net_ = Mlp(params_, "reward", {feat, hidden, hidden, 1}, Mlp::Act::Elu, rng);
  violation_net_ = Mlp(params_, "violation", {feat, hidden, hidden, 1}, Mlp::Act::Elu, rng);
}

// ---------------------------------------------------------------------------
// preprocessing
// ---------------------------------------------------------------------------

num::Tensor Srssm::preprocess(const Tensor& raw) const {
  Tensor out = raw;
  if (cfg_.image_obs()) {
    const real levels = real((1 << cfg_.bit_depth) - 1);
    for (real& x : out.data) x = std::round(x * levels) / levels - 0.5;
  } else {
    for (real& x : out.data) x *= cfg_.obs_scale;
  }
  return out;
}

num::Tensor Srssm::postprocess(const Tensor& processed) const {
  Tensor out = processed;
  if (cfg_.image_obs()) {
    for (real& x : out.data) x = std::clamp(x + 0.5, 0.0, 1.0);
  } else {
    for (real& x : out.data) x /= cfg_.obs_scale;
  }
  return out;
}

// ---------------------------------------------------------------------------
// building blocks
// ---------------------------------------------------------------------------

Var Srssm::encode(Graph& g, Var processed_rows) const {
  if (!cfg_.image_obs()) return vec_enc_(g, processed_rows);
  const int n = processed_rows.val().dim(0);
  Var img = reshape(processed_rows,
                    {n, cfg_.obs_shape[0], cfg_.obs_shape[1], cfg_.obs_shape[2]});
  return conv_enc_(g, img);
}

Var Srssm::recurrent_input(Graph& g, Var z, Var action) const {
  return elu(rnn_in_(g, concat_cols(z, action)));
}

Srssm::Dist Srssm::prior(Graph& g, Var h) const {
  Var packed = prior_net_(g, h);
  Dist d;
  d.mean = slice_cols(packed, 0, cfg_.stochastic_size);
  d.std = add_scalar(softplus(slice_cols(packed, cfg_.stochastic_size, cfg_.stochastic_size)),
                     cfg_.min_std);
  return d;
}

Srssm::Dist Srssm::posterior(Graph& g, Var h, Var embed) const {
  Var packed = posterior_net_(g, concat_cols(h, embed));
  Dist d;
  d.mean = slice_cols(packed, 0, cfg_.stochastic_size);
  d.std = add_scalar(softplus(slice_cols(packed, cfg_.stochastic_size, cfg_.stochastic_size)),
                     cfg_.min_std);
  return d;
}

// ---------------------------------------------------------------------------
// inference path
// ---------------------------------------------------------------------------

CompactLatent Srssm::initial_state() const {
  CompactLatent s;
  s.h = Tensor({cfg_.deterministic_size});
  s.z = Tensor({cfg_.stochastic_size});
  return s;
}

CompactLatent Srssm::filter_step(const CompactLatent& prev, const Tensor& action_enc,
                                 const Tensor& raw_obs, Rng& rng) const {
  Graph g;
  Var h = g.input(as_row(prev.h));
  Var z = g.input(as_row(prev.z));
  Var a = g.input(as_row(action_enc));
  Var h2 = gru_(g, h, recurrent_input(g, z, a));

  Tensor obs_row({1, int(cfg_.obs_numel())});
  obs_row.data = preprocess(raw_obs).data;
  Var embed = encode(g, g.input(std::move(obs_row)));
  Dist post = posterior(g, h2, embed);

  Tensor eps = Tensor::randn({1, cfg_.stochastic_size}, rng);
  Var z2 = sample_reparam(post.mean, post.std, eps);

  CompactLatent out;
  out.h = Tensor({cfg_.deterministic_size}, g.value(h2).data);
  out.z = Tensor({cfg_.stochastic_size}, g.value(z2).data);
  return out;
}

real Srssm::predict_violation(const Tensor& feat) const {
  Graph g;
  Var logit = violation_logit(g, g.input(as_row(feat)));
  const real l = logit.val().at(0);
  return l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
}

real Srssm::predict_reward(const Tensor& feat) const {
  Graph g;
  Var r = reward_head(g, g.input(as_row(feat)));
  return r.val().at(0) * cfg_.reward_scale;
}

num::Tensor Srssm::decode_observation(const Tensor& feat) const {
  Graph g;
  Var rows = g.input(as_row(feat));
  Var decoded = cfg_.image_obs() ? Var(conv_dec_(g, rows)) : Var(vec_dec_(g, rows));
  Tensor flat(cfg_.obs_shape);
  flat.data = decoded.val().data;
  return postprocess(flat);
}

// ---------------------------------------------------------------------------
// LatentModel
// ---------------------------------------------------------------------------

Var Srssm::imagine_step(Graph& g, Var feat, Var action, Rng& rng) const {
  const int n = feat.val().dim(0);
  Var h = slice_cols(feat, 0, cfg_.deterministic_size);
  Var z = slice_cols(feat, cfg_.deterministic_size, cfg_.stochastic_size);
  Var h2 = gru_(g, h, recurrent_input(g, z, action));
  Dist pr = prior(g, h2);
  Tensor eps = Tensor::randn({n, cfg_.stochastic_size}, rng);
  Var z2 = sample_reparam(pr.mean, pr.std, eps);
  return concat_cols(h2, z2);
}

Var Srssm::reward_head(Graph& g, Var feat) const { return reward_net_(g, feat); }

Var Srssm::violation_logit(Graph& g, Var feat) const { return violation_net_(g, feat); }

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

ObserveResult Srssm::observe_sequence(Graph& g, const SequenceBatch& batch, Rng& rng) const {
  const int B = batch.batch, L = batch.length;
  check(B >= 1 && L >= 1, "observe_sequence: empty batch");
  check(batch.observations.dim(0) == B * L, "observe_sequence: row count mismatch");
  check(batch.actions.dim(0) == B * L && batch.actions.dim(1) == cfg_.action_dim,
        "observe_sequence: action shape mismatch");
  check(batch.rewards.numel() == B * L && batch.violations.numel() == B * L,
        "observe_sequence: target length mismatch");

  const int dh = cfg_.deterministic_size;
  const int dz = cfg_.stochastic_size;
  const long obs_dim = cfg_.obs_numel();

  // Encode every frame in one pass: [B*L, obs] -> [B*L, embed].
  Tensor processed({B * L, int(obs_dim)});
  processed.data = preprocess(batch.observations).data;
  Var embed_all = encode(g, g.input(std::move(processed)));

  Var h = g.input(Tensor({B, dh}));
  Var z = g.input(Tensor({B, dz}));
  std::vector<Var> feats;  // one [B, feat] entry per step, t-major stacking later
  Var kl_sum;
  for (int t = 0; t < L; t++) {
    // executed action entering step t, constant w.r.t. the model
    Tensor at({B, cfg_.action_dim});
    for (int b = 0; b < B; b++)
      for (int j = 0; j < cfg_.action_dim; j++)
        at.at(long(b) * cfg_.action_dim + j) =
            batch.actions.at((long(b) * L + t) * cfg_.action_dim + j);
    Var a = g.input(std::move(at));

    Var h2 = gru_(g, h, recurrent_input(g, z, a));
    Var embed_t = slice_rows_strided(embed_all, t, L);
    Dist post = posterior(g, h2, embed_t);
    Dist pri = prior(g, h2);

    // KL balancing: the transition model chases the posterior harder than the
    // posterior is regularised toward it.
    Var kl_prior_term = kl_diag_gaussian(stop_grad(post.mean), stop_grad(post.std), pri.mean,
                                         pri.std);
    Var kl_post_term = kl_diag_gaussian(post.mean, post.std, stop_grad(pri.mean),
                                        stop_grad(pri.std));
    Var kl_t = add(mul_scalar(kl_prior_term, cfg_.kl_balance),
                   mul_scalar(kl_post_term, 1.0 - cfg_.kl_balance));
    kl_sum = t == 0 ? kl_t : add(kl_sum, kl_t);

    Tensor eps = Tensor::randn({B, dz}, rng);
    Var z2 = sample_reparam(post.mean, post.std, eps);
    feats.push_back(concat_cols(h2, z2));
    h = h2;
    z = z2;
  }

  Var stacked = concat_rows(feats);  // [L*B, feat], t-major

  // Targets rearranged to the same t-major order.
  Tensor obs_target({B * L, int(obs_dim)});
  Tensor reward_target({B * L, 1});
  Tensor violation_target({B * L, 1});
  const Tensor pre_obs = preprocess(batch.observations);
  for (int t = 0; t < L; t++)
    for (int b = 0; b < B; b++) {
      const long src = long(b) * L + t;
      const long dst = long(t) * B + b;
      std::memcpy(obs_target.ptr() + dst * obs_dim, pre_obs.ptr() + src * obs_dim,
                  sizeof(real) * size_t(obs_dim));
      reward_target.at(dst) = batch.rewards.at(src) / cfg_.reward_scale;
      violation_target.at(dst) = batch.violations.at(src);
    }

  const real inv_bl = 1.0 / real(B * L);

  Var decoded = cfg_.image_obs() ? Var(conv_dec_(g, stacked)) : Var(vec_dec_(g, stacked));
  Var decoded_rows = reshape(decoded, {B * L, int(obs_dim)});
  Var obs_loss = mul_scalar(gaussian_nll(decoded_rows, obs_target), inv_bl);

  Var reward_loss = mul_scalar(gaussian_nll(reward_net_(g, stacked), reward_target), inv_bl);

  Var kl_loss = mul_scalar(kl_sum, inv_bl);
  if (cfg_.free_nats > 0.0 && kl_loss.val().at(0) < cfg_.free_nats)
    kl_loss = g.input_scalar(cfg_.free_nats);  // no KL pressure below the allowance

  Var violation_loss = mul_scalar(
      weighted_bce(violation_net_(g, stacked), violation_target, cfg_.violation_weight),
      inv_bl);

  Var total = add(add(add(obs_loss, reward_loss), kl_loss), violation_loss);

  ObserveResult result;
  result.total = total;
  result.loss.observation = obs_loss.val().at(0);
  result.loss.reward = reward_loss.val().at(0);
  result.loss.kl = kl_loss.val().at(0);
  result.loss.violation = violation_loss.val().at(0);
  result.loss.total = total.val().at(0);
  if (!std::isfinite(result.loss.total))
    throw NumericError("non-finite model loss: obs=" + std::to_string(result.loss.observation) +
                       " reward=" + std::to_string(result.loss.reward) +
                       " kl=" + std::to_string(result.loss.kl) +
                       " violation=" + std::to_string(result.loss.violation));
  result.posterior_feats = stacked.val();
  return result;
}

}  // namespace ls::srssm
