#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "checkpoint.hpp"
#include "envs.hpp"
#include "srssm.hpp"

using namespace ls;
using namespace ls::srssm;

namespace {

ModelConfig tiny_cd_config() {
  ModelConfig cfg;
  cfg.obs_shape = {2};
  cfg.action_dim = 1;
  cfg.deterministic_size = 8;
  cfg.stochastic_size = 6;
  cfg.hidden_size = 16;
  cfg.embed_size = 12;
  cfg.obs_scale = 0.1;
  cfg.reward_scale = 1.0;
  return cfg;
}

ModelConfig tiny_vgw_config() {
  ModelConfig cfg;
  cfg.obs_shape = {3, 16, 16};
  cfg.action_dim = 5;
  cfg.deterministic_size = 16;
  cfg.stochastic_size = 6;
  cfg.hidden_size = 24;
  cfg.cnn_depth = 4;
  cfg.reward_scale = 50.0;
  return cfg;
}

SequenceBatch random_batch(const ModelConfig& cfg, int B, int L, Rng& rng,
                           real violation_rate = 0.2) {
  SequenceBatch batch;
  batch.batch = B;
  batch.length = L;
  const long obs_dim = cfg.obs_numel();
  batch.observations = num::Tensor({B * L, int(obs_dim)});
  for (real& x : batch.observations.data) x = rng.uniform(0.0, 1.0);
  batch.actions = num::Tensor({B * L, cfg.action_dim});
  for (int r = 0; r < B * L; r++) {
    if (cfg.action_dim > 1)
      batch.actions.at(long(r) * cfg.action_dim + int(rng.bounded(uint64_t(cfg.action_dim)))) =
          1.0;
    else
      batch.actions.at(r) = rng.uniform(-1.0, 1.0);
  }
  batch.rewards = num::Tensor({B * L});
  for (real& x : batch.rewards.data) x = rng.uniform(-1.0, 1.0);
  batch.violations = num::Tensor({B * L});
  for (real& x : batch.violations.data) x = rng.bernoulli(violation_rate) ? 1.0 : 0.0;
  return batch;
}

}  // namespace

TEST_CASE("initial state is zero and reproducible") {
  Srssm model(tiny_cd_config(), 7);
  CompactLatent a = model.initial_state();
  CompactLatent b = model.initial_state();
  CHECK(a.h.numel() == 8);
  CHECK(a.z.numel() == 6);
  real norm = 0.0;
  for (real v : a.h.data) norm += v * v;
  for (real v : a.z.data) norm += v * v;
  CHECK(norm == 0.0);
  CHECK(a.feat().data == b.feat().data);
}

TEST_CASE("filter step: shapes, determinism, finite values") {
  Srssm model(tiny_cd_config(), 7);
  num::Tensor obs({2}, {9.5, 0.5});
  num::Tensor action({1}, {0.3});
  Rng r1(3), r2(3);
  CompactLatent s1 = model.filter_step(model.initial_state(), action, obs, r1);
  CompactLatent s2 = model.filter_step(model.initial_state(), action, obs, r2);
  CHECK(s1.h.data == s2.h.data);
  CHECK(s1.z.data == s2.z.data);
  CHECK(all_finite(s1.h.data));
  CHECK(all_finite(s1.z.data));
}

TEST_CASE("violation prediction is a probability") {
  Srssm model(tiny_vgw_config(), 11);
  Rng rng(4);
  for (int i = 0; i < 50; i++) {
    num::Tensor feat = num::Tensor::randn({model.feat_dim()}, rng, 2.0);
    const real p = model.predict_violation(feat);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("decoded observation has the observation shape") {
  Srssm model(tiny_vgw_config(), 11);
  Rng rng(4);
  num::Tensor feat = num::Tensor::randn({model.feat_dim()}, rng);
  num::Tensor decoded = model.decode_observation(feat);
  CHECK(decoded.shape == std::vector<int>{3, 16, 16});
  for (real v : decoded.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("observe_sequence: exact loss decomposition, kl nonnegative") {
  for (uint64_t seed = 0; seed < 3; seed++) {
    Srssm model(tiny_cd_config(), seed);
    Rng rng(seed + 100);
    SequenceBatch batch = random_batch(model.config(), 4, 6, rng);
    num::Graph g;
    ObserveResult res = model.observe_sequence(g, batch, rng);
    // components were summed in this exact order into the total node
    const real recomposed =
        ((res.loss.observation + res.loss.reward) + res.loss.kl) + res.loss.violation;
    CHECK(res.loss.total == recomposed);
    CHECK(res.loss.kl >= 0.0);
    CHECK(res.loss.violation >= 0.0);
    CHECK(res.posterior_feats.shape == std::vector<int>{24, model.feat_dim()});
    CHECK(all_finite(res.posterior_feats.data));
  }
}

TEST_CASE("observe_sequence: all-safe batch equals unweighted BCE on negatives") {
  Srssm model(tiny_cd_config(), 3);
  Rng rng(5);
  SequenceBatch batch = random_batch(model.config(), 3, 5, rng, 0.0);  // no positives

  num::Graph g;
  Rng rng_a(77);
  ObserveResult weighted = model.observe_sequence(g, batch, rng_a);

  // recompute the violation term with weight 1 on the same posterior feats
  num::Graph g2;
  num::Var logits = model.violation_logit(g2, g2.input(weighted.posterior_feats));
  num::Tensor labels({batch.batch * batch.length, 1});
  num::Var unweighted = num::mul_scalar(num::weighted_bce(logits, labels, 1.0),
                                        1.0 / real(batch.batch * batch.length));
  CHECK(weighted.loss.violation == doctest::Approx(unweighted.val().at(0)).epsilon(1e-12));
}

TEST_CASE("imagine: horizon one, determinism, probabilities in range") {
  Srssm model(tiny_cd_config(), 9);
  Rng rng(1);
  num::Tensor start({2, model.feat_dim()});
  for (real& v : start.data) v = rng.uniform(-1.0, 1.0);

  model::PolicyFn policy = [](num::Graph& g, num::Var feat, Rng&) {
    return num::mul_scalar(num::slice_cols(feat, 0, 1), 0.0);  // action 0
  };

  {
    num::Graph g;
    Rng r(42);
    auto traj = model::imagine(g, model, g.input(start), policy, 1, 0.0, r);
    CHECK(traj.feats.size() == 1);
    CHECK(traj.rewards.size() == 1);
    CHECK(traj.violation_probs.size() == 1);
  }

  auto run = [&](uint64_t s) {
    num::Graph g;
    Rng r(s);
    auto traj = model::imagine(g, model, g.input(start), policy, 5, 0.0, r);
    return traj.feats.back().val().data;
  };
  CHECK(run(7) == run(7));           // fixed rng, reproducible rollout
  CHECK_FALSE(run(7) == run(8));     // prior sampling differs across streams

  num::Graph g;
  Rng r(3);
  auto traj = model::imagine(g, model, g.input(start), policy, 6, 0.0, r);
  for (const num::Var& p : traj.violation_probs)
    for (real v : p.val().data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("one training step on a fixed small batch reduces the loss") {
  // averaged over seeds per the smoke oracle
  int improved = 0;
  const int seeds = 10;
  for (uint64_t seed = 0; seed < seeds; seed++) {
    Srssm model(tiny_cd_config(), seed + 40);
    Rng rng(seed + 900);
    SequenceBatch batch = random_batch(model.config(), 6, 6, rng);
    num::Adam opt(1e-2);

    Rng sample_rng(1);
    num::Graph g1;
    ObserveResult before = model.observe_sequence(g1, batch, sample_rng);
    g1.backward(before.total);
    num::ParamStore& ps = model.params();
    std::vector<num::Tensor> grads;
    for (size_t i = 0; i < ps.size(); i++) grads.push_back(g1.grad_of(ps.item(i).second));
    num::clip_global_norm(grads, 100.0);
    opt.step(ps.tensors(), grads);

    Rng sample_rng2(1);  // same stochastic-state draws
    num::Graph g2;
    ObserveResult after = model.observe_sequence(g2, batch, sample_rng2);
    if (after.loss.total < before.loss.total) improved++;
  }
  CHECK(improved >= 8);
}

TEST_CASE("overfit sanity: 500 steps on one 10-step episode") {
  // collect one fixed cliff episode
  envs::CliffConfig ecfg;
  ecfg.p_stick = 0.0;
  ecfg.episode_length = 10;
  envs::CliffState env = envs::cd_reset(ecfg, 3);
  ModelConfig mcfg = tiny_cd_config();
  const int rows = 11;
  SequenceBatch batch;
  batch.batch = 1;
  batch.length = rows;
  batch.observations = num::Tensor({rows, 2});
  batch.actions = num::Tensor({rows, 1});
  batch.rewards = num::Tensor({rows});
  batch.violations = num::Tensor({rows});
  batch.observations.at(0) = env.x;
  batch.observations.at(1) = env.v;
  Rng arng(5);
  for (int t = 1; t < rows; t++) {
    const real a = arng.uniform(-1.0, 0.5);
    envs::LiteStep step = envs::cd_step_lite(env, a);
    batch.observations.at(long(t) * 2) = env.x;
    batch.observations.at(long(t) * 2 + 1) = env.v;
    batch.actions.at(t) = a;
    batch.rewards.at(t) = step.reward;
  }

  Srssm model(mcfg, 21);
  num::Adam opt(3e-3);
  real initial = -1.0, final = -1.0;
  for (int step = 0; step < 500; step++) {
    Rng rng{uint64_t(step)};
    num::Graph g;
    ObserveResult res = model.observe_sequence(g, batch, rng);
    if (step == 0) initial = res.loss.observation;
    final = res.loss.observation;
    g.backward(res.total);
    num::ParamStore& ps = model.params();
    std::vector<num::Tensor> grads;
    for (size_t i = 0; i < ps.size(); i++) grads.push_back(g.grad_of(ps.item(i).second));
    num::clip_global_norm(grads, 100.0);
    opt.step(ps.tensors(), grads);
  }
  CAPTURE(initial);
  CAPTURE(final);
  CHECK(final < 0.1 * initial);
}

TEST_CASE("violation head learns a linear rule in z to 95% accuracy") {
  ModelConfig cfg = tiny_cd_config();
  Srssm model(cfg, 33);
  Rng rng(8);

  // synthetic latents labelled by a linear functional of z
  const int n = 400;
  num::Tensor feats({n, model.feat_dim()});
  num::Tensor labels({n, 1});
  num::Tensor w = num::Tensor::randn({cfg.stochastic_size}, rng);
  for (int i = 0; i < n; i++) {
    real dot = 0.0;
    for (int j = 0; j < model.feat_dim(); j++) {
      const real v = rng.normal();
      feats.at(long(i) * model.feat_dim() + j) = v;
      if (j >= cfg.deterministic_size) dot += w.at(j - cfg.deterministic_size) * v;
    }
    labels.at(i) = dot > 0.0 ? 1.0 : 0.0;
  }

  // train only the violation head
  num::ParamStore& ps = model.params();
  std::vector<num::Tensor*> head_params;
  std::vector<std::string> head_names;
  for (size_t i = 0; i < ps.size(); i++)
    if (ps.item(i).first.rfind("violation/", 0) == 0) {
      head_params.push_back(&ps.item(i).second);
      head_names.push_back(ps.item(i).first);
    }
  REQUIRE(!head_params.empty());
  num::Adam opt(1e-2);
  for (int step = 0; step < 300; step++) {
    num::Graph g;
    num::Var logit = model.violation_logit(g, g.input(feats));
    num::Var loss = num::mul_scalar(num::weighted_bce(logit, labels, 3.0), 1.0 / n);
    g.backward(loss);
    std::vector<num::Tensor> grads;
    for (auto* p : head_params) grads.push_back(g.grad_of(*p));
    num::clip_global_norm(grads, 100.0);
    opt.step(head_params, grads);
  }

  int correct = 0;
  for (int i = 0; i < n; i++) {
    num::Tensor f({model.feat_dim()});
    for (int j = 0; j < model.feat_dim(); j++) f.at(j) = feats.at(long(i) * model.feat_dim() + j);
    const real p = model.predict_violation(f);
    if ((p >= 0.5) == (labels.at(i) > 0.5)) correct++;
  }
  CHECK(real(correct) / n >= 0.95);
}

TEST_CASE("image preprocessing: bit depth quantisation and centring") {
  ModelConfig cfg = tiny_vgw_config();
  cfg.bit_depth = 5;
  Srssm model(cfg, 1);
  num::Tensor raw({3, 16, 16});
  Rng rng(2);
  for (real& v : raw.data) v = rng.uniform(0.0, 1.0);
  num::Tensor pre = model.preprocess(raw);
  for (long i = 0; i < pre.numel(); i++) {
    CHECK(pre.at(i) >= -0.5);
    CHECK(pre.at(i) <= 0.5);
    const real levels = real((1 << 5) - 1);
    const real reconstructed = (pre.at(i) + 0.5) * levels;
    CHECK(std::fabs(reconstructed - std::round(reconstructed)) < 1e-9);  // 32 levels
  }
  // postprocess inverts up to quantisation
  num::Tensor post = model.postprocess(pre);
  for (long i = 0; i < post.numel(); i++)
    CHECK(std::fabs(post.at(i) - raw.at(i)) <= 0.5 / 31.0 + 1e-12);
}

TEST_CASE("checkpoints restore parameters exactly (after float32 rounding)") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ls_ckpt_test.bin").string();
  Srssm model(tiny_cd_config(), 17);
  num::save_checkpoint(path, {{"model", &model.params()}});

  Srssm other(tiny_cd_config(), 999);  // different init
  num::load_checkpoint(path, {{"model", &other.params()}});
  // float32 rounding applied by the save; a second round trip is exact
  num::save_checkpoint(path, {{"model", &other.params()}});
  Srssm third(tiny_cd_config(), 4242);
  num::load_checkpoint(path, {{"model", &third.params()}});
  CHECK(other.params().content_hash() == third.params().content_hash());

  // shape mismatch is an error
  ModelConfig bigger = tiny_cd_config();
  bigger.deterministic_size = 12;
  Srssm wrong(bigger, 1);
  CHECK_THROWS_AS(num::load_checkpoint(path, {{"model", &wrong.params()}}), Error);
  std::filesystem::remove(path);
}
