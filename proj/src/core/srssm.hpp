#pragma once

#include "adam.hpp"
#include "latent_model.hpp"
#include "nets.hpp"

namespace ls::srssm {

struct ModelConfig {
  std::vector<int> obs_shape;  // [3,s,s] for images, [d] for vectors
  int action_dim = 1;
  int deterministic_size = 200;  // |h|
  int stochastic_size = 30;      // |z|
  int hidden_size = 200;
  int cnn_depth = 32;            // image encoder base channels
  int embed_size = 32;           // vector-observation embedding
  int bit_depth = 5;             // image quantisation levels = 2^bit_depth
  real obs_scale = 1.0;          // vector observations are multiplied by this
  real reward_scale = 1.0;       // targets are reward / reward_scale
  real violation_weight = 3.0;   // positive-class weight of the violation BCE
  real kl_balance = 0.8;         // weight of the prior-toward-posterior KL term
  real free_nats = 0.0;
  real min_std = 0.1;            // std floor under softplus

  bool image_obs() const { return obs_shape.size() == 3; }
  long obs_numel() const { return num::Tensor::numel_of(obs_shape); }
};

// Deterministic + stochastic latent state of one stream.
struct CompactLatent {
  num::Tensor h, z;

  num::Tensor feat() const {
    num::Tensor f({1, h.dim(0) + z.dim(0)});
    std::copy(h.data.begin(), h.data.end(), f.data.begin());
    std::copy(z.data.begin(), z.data.end(), f.data.begin() + h.numel());
    return f;
  }
};

struct ModelLoss {
  real observation = 0.0;
  real reward = 0.0;
  real kl = 0.0;
  real violation = 0.0;
  real total = 0.0;
};

// [B, L] sequences flattened to [B*L, ...] rows, time-major within each
// sequence (row b*L + t is step t of sequence b).
struct SequenceBatch {
  int batch = 0, length = 0;
  num::Tensor observations;  // [B*L, obs dims...] raw environment values
  num::Tensor actions;       // [B*L, action_dim] encoded executed actions
  num::Tensor rewards;       // [B*L] stored rewards
  num::Tensor violations;    // [B*L] lambda flags in {0,1}
};

struct ObserveResult {
  num::Var total;                 // scalar loss node (backward target)
  ModelLoss loss;                 // component values; total is their exact sum
  num::Tensor posterior_feats;    // [B*L, feat] detached compact states
};

class Srssm final : public model::LatentModel {
 public:
  Srssm(ModelConfig cfg, uint64_t param_seed);

  const ModelConfig& config() const { return cfg_; }
  num::ParamStore& params() { return params_; }
  const num::ParamStore& params() const { return params_; }

  // --- inference-path API (fresh internal graphs, plain tensors) ----------

  CompactLatent initial_state() const;

  // Posterior filter step: h' from (h, z, action), z' sampled from
  // q(z' | h', encode(obs)).
  CompactLatent filter_step(const CompactLatent& prev, const num::Tensor& action_enc,
                            const num::Tensor& raw_obs, Rng& rng) const;

  real predict_violation(const num::Tensor& feat) const;  // probability in [0,1]
  real predict_reward(const num::Tensor& feat) const;     // environment units
  num::Tensor decode_observation(const num::Tensor& feat) const;  // raw obs space

  // --- training path --------------------------------------------------------

  // Filters every sequence with posterior sampling and assembles the model
  // objective: unit-variance Gaussian NLL for observations and rewards,
  // KL-balanced divergence between posterior and prior, and the weighted BCE
  // of the violation head.
  ObserveResult observe_sequence(num::Graph& g, const SequenceBatch& batch, Rng& rng) const;

  // --- LatentModel ----------------------------------------------------------

  int feat_dim() const override { return cfg_.deterministic_size + cfg_.stochastic_size; }
  int action_dim() const override { return cfg_.action_dim; }
  num::Var imagine_step(num::Graph& g, num::Var feat, num::Var action,
                        Rng& rng) const override;
  num::Var reward_head(num::Graph& g, num::Var feat) const override;
  num::Var violation_logit(num::Graph& g, num::Var feat) const override;

  // Maps raw observations ([n, dims...]) to the model's target space: images
  // are quantised to 2^bit_depth levels and centred to [-0.5, 0.5]; vectors
  // are scaled by obs_scale.
  num::Tensor preprocess(const num::Tensor& raw) const;
  // Inverse of preprocess (up to quantisation) for rendering decoder output.
  num::Tensor postprocess(const num::Tensor& processed) const;

  num::Var encode(num::Graph& g, num::Var processed_obs_rows) const;
  int embed_dim() const { return embed_dim_; }

 private:
  struct Dist {
    num::Var mean, std;
  };

  num::Var recurrent_input(num::Graph& g, num::Var z, num::Var action) const;
  Dist prior(num::Graph& g, num::Var h) const;
  Dist posterior(num::Graph& g, num::Var h, num::Var embed) const;
  num::Var split_std(num::Graph& g, num::Var packed, Dist& out) const;

  ModelConfig cfg_;
  num::ParamStore params_;
  num::ConvEncoder conv_enc_;
  num::ConvDecoder conv_dec_;
  num::Mlp vec_enc_, vec_dec_;
  num::Mlp rnn_in_;
  num::GruCell gru_;
  num::Mlp prior_net_, posterior_net_;
  num::Mlp reward_net_, violation_net_;
  int embed_dim_ = 0;
};

}  // namespace ls::srssm
