#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle_shield.hpp"

using namespace ls;
using namespace ls::shield;

namespace {

// Latent state = one scalar. The first transition decides the trajectory's
// fate (carried thereafter); the decision rule is injectable.
class FateMock : public model::LatentModel {
 public:
  using Fate = std::function<real(const envs::Action& first, Rng&)>;  // >0 = doomed

  explicit FateMock(Fate fate) : fate_(std::move(fate)) {}

  int feat_dim() const override { return 1; }
  int action_dim() const override { return 1; }

  num::Var imagine_step(num::Graph& g, num::Var feat, num::Var action, Rng& rng) const override {
    const int n = feat.val().dim(0);
    num::Tensor next({n, 1});
    for (int i = 0; i < n; i++) {
      if (feat.val().at(i) == 0.0) {
        trajectory_starts++;
        envs::Action a;
        a.idx = int(std::lround(action.val().at(i)));
        a.value = action.val().at(i);
        next.at(i) = fate_(a, rng);
      } else {
        next.at(i) = feat.val().at(i);
      }
    }
    return g.input(std::move(next));
  }
  num::Var reward_head(num::Graph& g, num::Var feat) const override {
    return g.input(num::Tensor({feat.val().dim(0), 1}));
  }
  num::Var violation_logit(num::Graph& g, num::Var feat) const override {
    const int n = feat.val().dim(0);
    num::Tensor logit({n, 1});
    for (int i = 0; i < n; i++) logit.at(i) = feat.val().at(i) > 0.0 ? 8.0 : -8.0;
    return g.input(std::move(logit));
  }

  mutable long trajectory_starts = 0;

 private:
  Fate fate_;
};

LatentShieldContext context_for(const FateMock& m) {
  LatentShieldContext ctx;
  ctx.model = &m;
  ctx.continuous = false;
  ctx.encode = [](const envs::Action& a) { return num::Tensor({1}, {real(a.idx)}); };
  ctx.policy = [](const num::Tensor&, Rng&) { return envs::Action{0, 0.0}; };
  return ctx;
}

ShieldConfig small_cfg(int n_actions = 4) {
  ShieldConfig cfg;
  cfg.horizon = 3;
  cfg.samples = 20;
  cfg.epsilon = 0.15;
  cfg.action_noise_var = 0.0;
  for (int a = 0; a < n_actions; a++) cfg.candidates.push_back(envs::Action{a, 0.0});
  return cfg;
}

}  // namespace

TEST_CASE("risk estimator: all-safe and all-doomed mocks") {
  FateMock safe([](const envs::Action&, Rng&) { return -1.0; });
  FateMock doomed([](const envs::Action&, Rng&) { return 1.0; });
  ShieldConfig cfg = small_cfg();
  Rng rng(1);
  auto ctx_safe = context_for(safe);
  CHECK(estimate_violation_probability(ctx_safe, num::Tensor({1}), envs::Action{0, 0.0}, cfg,
                                       rng) == 0.0);
  auto ctx_doomed = context_for(doomed);
  CHECK(estimate_violation_probability(ctx_doomed, num::Tensor({1}), envs::Action{0, 0.0},
                                       cfg, rng) == 1.0);
}

TEST_CASE("risk estimator: Bernoulli(0.3) lands in the binomial interval") {
  FateMock coin([](const envs::Action&, Rng& r) { return r.bernoulli(0.3) ? 1.0 : -1.0; });
  ShieldConfig cfg = small_cfg();
  cfg.samples = 1000;
  Rng rng(7);
  auto ctx = context_for(coin);
  const real risk =
      estimate_violation_probability(ctx, num::Tensor({1}), envs::Action{0, 0.0}, cfg, rng);
  CHECK(std::fabs(risk - 0.3) < 0.05);  // 99% binomial interval at N=1000
}

TEST_CASE("risk estimator: unbiased over repeated calls") {
  for (real p : {0.1, 0.5}) {
    FateMock coin([p](const envs::Action&, Rng& r) { return r.bernoulli(p) ? 1.0 : -1.0; });
    ShieldConfig cfg = small_cfg();
    cfg.samples = 100;
    Rng rng(11);
    auto ctx = context_for(coin);
    real sum = 0.0;
    const int calls = 200;  // 2e4 samples per probability
    for (int i = 0; i < calls; i++)
      sum += estimate_violation_probability(ctx, num::Tensor({1}), envs::Action{0, 0.0}, cfg,
                                            rng);
    CHECK(std::fabs(sum / calls - p) < 0.02);
  }
}

TEST_CASE("abps: all-safe model passes the proposed action through") {
  FateMock safe([](const envs::Action&, Rng&) { return -1.0; });
  ShieldConfig cfg = small_cfg();
  Rng rng(3);
  auto ctx = context_for(safe);
  ShieldDecision d = abps_filter(ctx, num::Tensor({1}), envs::Action{2, 0.0}, cfg, rng);
  CHECK_FALSE(d.interfered);
  CHECK(d.action.idx == 2);
  CHECK(d.risk == 0.0);
}

TEST_CASE("abps: single safe alternative is found in candidate order") {
  // only action 2 is safe
  FateMock mock([](const envs::Action& a, Rng&) { return a.idx == 2 ? -1.0 : 1.0; });
  ShieldConfig cfg = small_cfg();
  Rng rng(3);
  auto ctx = context_for(mock);
  ShieldDecision d = abps_filter(ctx, num::Tensor({1}), envs::Action{0, 0.0}, cfg, rng);
  CHECK(d.interfered);
  CHECK(d.action.idx == 2);
  CHECK(d.risk == 0.0);
  // candidates 1 was evaluated before 2 (order), 3 never after acceptance
  REQUIRE(d.evaluated.size() == 3);
  CHECK(d.evaluated[0].action.idx == 0);
  CHECK(d.evaluated[1].action.idx == 1);
  CHECK(d.evaluated[2].action.idx == 2);
}

TEST_CASE("abps: doomed model falls back to a random candidate, interfered") {
  FateMock doomed([](const envs::Action&, Rng&) { return 1.0; });
  ShieldConfig cfg = small_cfg();
  Rng rng(5);
  auto ctx = context_for(doomed);
  ShieldDecision d = abps_filter(ctx, num::Tensor({1}), envs::Action{1, 0.0}, cfg, rng);
  CHECK(d.interfered);
  CHECK(d.action.idx != 1);  // a candidate other than the proposed action
  CHECK(d.evaluated.size() == 4);
  CHECK(d.risk == 1.0);
}

TEST_CASE("abps: memoisation caps risk evaluations per candidate") {
  FateMock doomed([](const envs::Action&, Rng&) { return 1.0; });
  ShieldConfig cfg = small_cfg();
  cfg.samples = 10;
  Rng rng(5);
  auto ctx = context_for(doomed);
  abps_filter(ctx, num::Tensor({1}), envs::Action{1, 0.0}, cfg, rng);
  // 4 candidates evaluated once each (the random fallback reuses its memo);
  // doomed trajectories stop after the first step, so starts = evaluations * N
  CHECK(doomed.trajectory_starts == 4 * 10);
}

TEST_CASE("abps: risk exactly at epsilon accepts (strict interference)") {
  // deterministic 3-in-20 unsafe trajectories: risk = 0.15 == epsilon
  long counter = 0;
  FateMock mock([&counter](const envs::Action&, Rng&) {
    return (counter++ % 20) < 3 ? 1.0 : -1.0;
  });
  ShieldConfig cfg = small_cfg();
  cfg.samples = 20;
  cfg.epsilon = 0.15;
  Rng rng(5);
  auto ctx = context_for(mock);
  ShieldDecision d = abps_filter(ctx, num::Tensor({1}), envs::Action{1, 0.0}, cfg, rng);
  CHECK(d.risk == doctest::Approx(0.15));
  CHECK_FALSE(d.interfered);
  CHECK(d.action.idx == 1);
}

TEST_CASE("abps property: Eq.3 case law on random mocks") {
  Rng meta(99);
  for (int trial = 0; trial < 60; trial++) {
    // random per-action doom probabilities
    std::array<real, 4> doom{};
    for (real& d : doom) d = meta.uniform();
    FateMock mock([&doom](const envs::Action& a, Rng& r) {
      return r.bernoulli(doom[size_t(a.idx)]) ? 1.0 : -1.0;
    });
    ShieldConfig cfg = small_cfg();
    cfg.samples = 25;
    cfg.epsilon = meta.uniform(0.05, 0.5);
    Rng rng(meta.next_u64());
    auto ctx = context_for(mock);
    const envs::Action proposed{int(meta.bounded(4)), 0.0};
    ShieldDecision d = abps_filter(ctx, num::Tensor({1}), proposed, cfg, rng);

    if (!d.interfered) CHECK(d.action.idx == proposed.idx);
    // whenever some evaluated candidate had risk <= eps, the returned action does
    bool some_safe = false;
    for (const auto& c : d.evaluated) some_safe = some_safe || c.risk <= cfg.epsilon;
    if (some_safe) CHECK(d.risk <= cfg.epsilon);
  }
}

TEST_CASE("epsilon schedule: constant and linear with clamping") {
  EpsilonSchedule constant;
  constant.mode = EpsilonSchedule::Mode::Constant;
  constant.start = constant.end = 0.15;
  CHECK(epsilon_at(constant, 0) == 0.15);
  CHECK(epsilon_at(constant, 123456) == 0.15);

  EpsilonSchedule linear;
  linear.mode = EpsilonSchedule::Mode::Linear;
  linear.start = 0.5;
  linear.end = 0.125;
  linear.total_steps = 1000;
  CHECK(epsilon_at(linear, 0) == 0.5);
  CHECK(epsilon_at(linear, 500) == doctest::Approx(0.3125));
  CHECK(epsilon_at(linear, 1000) == doctest::Approx(0.125));
  CHECK(epsilon_at(linear, 5000) == doctest::Approx(0.125));  // clamped at the end value
  CHECK_THROWS_AS(epsilon_at(linear, -1), InvalidArgument);
}

// ---------------------------------------------------------------------------
// oracle shield
// ---------------------------------------------------------------------------

namespace {

envs::GridWorldEnv make_grid(int size, std::vector<std::pair<int, int>> red,
                             uint64_t seed = 3) {
  envs::GridWorldConfig cfg;
  cfg.width = cfg.height = size;
  cfg.mode = envs::VgwMode::Fixed;
  cfg.layout_seed = 1;  // seeded layout, replaced below
  cfg.unsafe_cells = int(red.size());
  cfg.render_size = 16;
  cfg.episode_length = 50;
  envs::GridWorldEnv env(cfg);
  env.reset(seed);
  // overwrite with the hand-picked layout through the snapshot interface
  auto state = *static_cast<const envs::GridWorldState*>(env.save_state().get());
  std::fill(state.unsafe.begin(), state.unsafe.end(), 0);
  for (auto [x, y] : red) state.unsafe[size_t(y) * size + x] = 1;
  state.agent_x = state.agent_y = 0;
  state.target_x = state.target_y = size - 1;
  env.load_state(std::make_shared<envs::GridWorldState>(state));
  return env;
}

void place_agent(envs::GridWorldEnv& env, int x, int y) {
  auto state = *static_cast<const envs::GridWorldState*>(env.save_state().get());
  state.agent_x = x;
  state.agent_y = y;
  env.load_state(std::make_shared<envs::GridWorldState>(state));
}

OracleConfig vgw_oracle(int horizon) {
  OracleConfig cfg;
  cfg.horizon = horizon;
  for (int a = 0; a < envs::kVgwActions; a++) cfg.candidates.push_back(envs::Action{a, 0.0});
  cfg.draws = 1;
  return cfg;
}

}  // namespace

TEST_CASE("oracle: stepping into a red cell is blocked at H=1") {
  envs::GridWorldEnv env = make_grid(5, {{1, 0}});
  place_agent(env, 0, 0);  // red cell to the right
  scltl::Monitor monitor(env.safety_spec());
  Rng rng(1);
  ShieldDecision d = oracle_bps_filter(env, monitor, envs::Action{int(envs::VgwAction::Right), 0},
                                       vgw_oracle(1), rng);
  CHECK(d.interfered);
  CHECK(d.action.idx != int(envs::VgwAction::Right));
  // and the environment is exactly as it was
  CHECK(env.state().agent_x == 0);
  CHECK(env.state().step_count == 0);
}

TEST_CASE("oracle: open grid accepts the proposed action at H=2") {
  envs::GridWorldEnv env = make_grid(5, {{4, 4}});
  place_agent(env, 1, 1);
  scltl::Monitor monitor(env.safety_spec());
  Rng rng(1);
  ShieldDecision d = oracle_bps_filter(env, monitor, envs::Action{int(envs::VgwAction::Right), 0},
                                       vgw_oracle(2), rng);
  CHECK_FALSE(d.interfered);
  CHECK(d.action.idx == int(envs::VgwAction::Right));
}

TEST_CASE("oracle: inevitable violation takes the accept branch") {
  // cliff at x=1 moving at v=3: every admissible action still lands below 0
  envs::CliffConfig cfg;
  cfg.p_stick = 0.0;
  envs::CliffEnv env(cfg);
  env.reset(1);
  auto state = *static_cast<const envs::CliffState*>(env.save_state().get());
  state.x = 1.0;
  state.v = 3.0;
  env.load_state(std::make_shared<envs::CliffState>(state));

  OracleConfig ocfg;
  ocfg.horizon = 3;
  for (real b : {-1.0, -0.1, 0.1, 1.0}) ocfg.candidates.push_back(envs::Action{0, b});
  ocfg.draws = 1;
  scltl::Monitor monitor(env.safety_spec());
  Rng rng(1);
  ShieldDecision d = oracle_bps_filter(env, monitor, envs::Action{0, 0.5}, ocfg, rng);
  CHECK_FALSE(d.interfered);             // nothing to protect: doom is certain
  CHECK(d.action.value == 0.5);          // proposed action handed back
  CHECK(d.risk == 1.0);
}

TEST_CASE("oracle: cliff braking escape is found among the bins") {
  envs::CliffConfig cfg;
  cfg.p_stick = 0.0;
  envs::CliffEnv env(cfg);
  env.reset(1);
  auto state = *static_cast<const envs::CliffState*>(env.save_state().get());
  state.x = 3.0;
  state.v = 2.0;
  env.load_state(std::make_shared<envs::CliffState>(state));

  OracleConfig ocfg;
  ocfg.horizon = 6;
  for (real b : {-1.0, -0.1, 0.1, 1.0}) ocfg.candidates.push_back(envs::Action{0, b});
  ocfg.draws = 1;
  scltl::Monitor monitor(env.safety_spec());
  Rng rng(1);
  // full throttle reaches the edge (x -> 0) but leaves v = 3: every
  // continuation falls, so the proposal is doomed; braking is not
  ShieldDecision d = oracle_bps_filter(env, monitor, envs::Action{0, 1.0}, ocfg, rng);
  CHECK(d.interfered);
  CHECK(d.action.value == -1.0);  // hardest braking is the first candidate bin

  // sanity: the mild state from the same family is recoverable, so the
  // proposal passes
  state.x = 3.0;
  state.v = 1.0;
  env.load_state(std::make_shared<envs::CliffState>(state));
  scltl::Monitor m2(env.safety_spec());
  ShieldDecision ok = oracle_bps_filter(env, m2, envs::Action{0, 1.0}, ocfg, rng);
  CHECK_FALSE(ok.interfered);
}

TEST_CASE("oracle: stochastic sticking is caught through repeated draws") {
  // at x=2.2, v=1, prev=1: proposing -1 is safe when applied, but a stuck
  // control repeats +1 (v -> 2, x -> 0.2; then v stays >= 2 and x goes
  // negative). With draws the stuck branch must be discovered eventually.
  envs::CliffConfig cfg;
  cfg.p_stick = 0.5;
  envs::CliffEnv env(cfg);
  env.reset(1);
  auto state = *static_cast<const envs::CliffState*>(env.save_state().get());
  state.x = 2.2;
  state.v = 1.0;
  state.prev_action = 1.0;
  env.load_state(std::make_shared<envs::CliffState>(state));

  OracleConfig ocfg;
  ocfg.horizon = 4;
  for (real b : {-1.0, -0.1, 0.1, 1.0}) ocfg.candidates.push_back(envs::Action{0, b});
  ocfg.draws = 16;
  scltl::Monitor monitor(env.safety_spec());
  Rng rng(3);
  ShieldDecision d = oracle_bps_filter(env, monitor, envs::Action{0, -1.0}, ocfg, rng);
  // with enough draws every sequence hits a stuck branch that falls: inevitable
  // under the K-draw decision rule, or at minimum the proposed action is not
  // blindly trusted; either way the call must return without violating state
  CHECK(env.state().x == 2.2);
  CHECK(env.state().v == 1.0);
  (void)d;
}

TEST_CASE("oracle: node budget aborts runaway searches") {
  envs::GridWorldEnv env = make_grid(8, {});
  place_agent(env, 4, 4);
  OracleConfig ocfg = vgw_oracle(8);
  ocfg.node_budget = 50;
  // no red cells anywhere: first completion succeeds fast, budget is fine
  scltl::Monitor monitor(env.safety_spec());
  Rng rng(1);
  CHECK_NOTHROW(oracle_bps_filter(env, monitor, envs::Action{0, 0}, ocfg, rng));

  // a doomed stochastic cliff state forces the full bins^(H-1) x draws sweep
  envs::CliffConfig ccfg;
  ccfg.p_stick = 0.5;
  envs::CliffEnv doomed(ccfg);
  doomed.reset(1);
  auto st = *static_cast<const envs::CliffState*>(doomed.save_state().get());
  st.x = 0.5;
  st.v = 5.0;
  doomed.load_state(std::make_shared<envs::CliffState>(st));
  OracleConfig tight;
  tight.horizon = 8;
  for (real b : {-1.0, -0.1, 0.1, 1.0}) tight.candidates.push_back(envs::Action{0, b});
  tight.draws = 8;
  tight.node_budget = 1000;
  scltl::Monitor m2(doomed.safety_spec());
  CHECK_THROWS_AS(oracle_bps_filter(doomed, m2, envs::Action{0, 0.0}, tight, rng), Error);
}

// ---------------------------------------------------------------------------
// bounded safety
// ---------------------------------------------------------------------------

TEST_CASE("bounded safety: stay-away policy holds on a 4x4 grid at H=2") {
  std::vector<uint8_t> mask(16, 0);
  mask[size_t(1) * 4 + 1] = 1;  // red at (1,1)
  ExplicitMdp mdp = grid_mdp(4, 4, mask);
  const scltl::Formula spec = scltl::parse("(!agent_in_red_square) U episode_ended",
                                           {"agent_in_red_square", "episode_ended"});

  // move right unless that enters the red cell, then stay
  auto policy = [&mdp, &mask](int s) {
    const int right = mdp.next(s, int(envs::VgwAction::Right));
    return mask[size_t(right)] ? int(envs::VgwAction::Stay) : int(envs::VgwAction::Right);
  };
  BoundedSafetyResult res = check_bounded_safety(mdp, policy, 2, spec);
  CHECK(res.holds);
}

TEST_CASE("bounded safety: stepping into an avoidable red cell is a counterexample") {
  std::vector<uint8_t> mask(16, 0);
  mask[size_t(1) * 4 + 1] = 1;
  ExplicitMdp mdp = grid_mdp(4, 4, mask);
  const scltl::Formula spec = scltl::parse("(!agent_in_red_square) U episode_ended",
                                           {"agent_in_red_square", "episode_ended"});
  auto reckless = [](int) { return int(envs::VgwAction::Right); };
  BoundedSafetyResult res = check_bounded_safety(mdp, reckless, 2, spec);
  CHECK_FALSE(res.holds);
  // the first failing state walks right into (1,1): that is (0,1) = state 4
  CHECK(res.counterexample == 4);
}

TEST_CASE("bounded safety: H=1 holds vacuously for any policy") {
  std::vector<uint8_t> clean(16, 0);
  ExplicitMdp mdp = grid_mdp(4, 4, clean);
  const scltl::Formula spec = scltl::parse("(!agent_in_red_square) U episode_ended",
                                           {"agent_in_red_square", "episode_ended"});
  auto arbitrary = [](int s) { return s % envs::kVgwActions; };
  CHECK(check_bounded_safety(mdp, arbitrary, 1, spec).holds);

  std::vector<uint8_t> spicy(16, 0);
  spicy[5] = spicy[10] = 1;
  ExplicitMdp mdp2 = grid_mdp(4, 4, spicy);
  CHECK(check_bounded_safety(mdp2, arbitrary, 1, spec).holds);
}

// ---------------------------------------------------------------------------
// agreement between the latent filter and the oracle
// ---------------------------------------------------------------------------

namespace {

// Perfect latent model of a fixed grid layout: feature = one-hot agent cell,
// transitions follow the true clamped movement, the violation head reads the
// true labels.
class PerfectGridModel final : public model::LatentModel {
 public:
  PerfectGridModel(int size, std::vector<uint8_t> mask) : size_(size), mask_(std::move(mask)) {}
  int feat_dim() const override { return size_ * size_; }
  int action_dim() const override { return envs::kVgwActions; }
  num::Var imagine_step(num::Graph& g, num::Var feat, num::Var action, Rng&) const override {
    const int n = feat.val().dim(0);
    num::Tensor next({n, size_ * size_});
    for (int i = 0; i < n; i++) {
      int cell = 0;
      for (int j = 0; j < size_ * size_; j++)
        if (feat.val().at(long(i) * size_ * size_ + j) == 1.0) cell = j;
      int a = 0;
      for (int j = 0; j < envs::kVgwActions; j++)
        if (action.val().at(long(i) * envs::kVgwActions + j) == 1.0) a = j;
      int x = cell % size_, y = cell / size_;
      switch (envs::VgwAction(a)) {
        case envs::VgwAction::Up: y--; break;
        case envs::VgwAction::Down: y++; break;
        case envs::VgwAction::Left: x--; break;
        case envs::VgwAction::Right: x++; break;
        case envs::VgwAction::Stay: break;
      }
      x = std::clamp(x, 0, size_ - 1);
      y = std::clamp(y, 0, size_ - 1);
      next.at(long(i) * size_ * size_ + y * size_ + x) = 1.0;
    }
    return g.input(std::move(next));
  }
  num::Var reward_head(num::Graph& g, num::Var feat) const override {
    return g.input(num::Tensor({feat.val().dim(0), 1}));
  }
  num::Var violation_logit(num::Graph& g, num::Var feat) const override {
    const int n = feat.val().dim(0);
    num::Tensor logit({n, 1});
    for (int i = 0; i < n; i++) {
      real red = -8.0;
      for (int j = 0; j < size_ * size_; j++)
        if (feat.val().at(long(i) * size_ * size_ + j) == 1.0 && mask_[size_t(j)]) red = 8.0;
      logit.at(i) = red;
    }
    return g.input(std::move(logit));
  }

 private:
  int size_;
  std::vector<uint8_t> mask_;
};

}  // namespace

TEST_CASE("abps with a perfect model matches the oracle on every 5x5 state-action") {
  const int size = 5;
  std::vector<std::pair<int, int>> red = {{1, 1}, {3, 2}, {2, 4}};
  std::vector<uint8_t> mask(size_t(size) * size, 0);
  for (auto [x, y] : red) mask[size_t(y) * size + x] = 1;

  PerfectGridModel model(size, mask);
  envs::GridWorldEnv env = make_grid(size, red);

  LatentShieldContext ctx;
  ctx.model = &model;
  ctx.continuous = false;
  ctx.encode = [](const envs::Action& a) {
    num::Tensor t({envs::kVgwActions});
    t.at(a.idx) = 1.0;
    return t;
  };
  // the rollout policy stays put, the always-available safe completion
  ctx.policy = [](const num::Tensor&, Rng&) {
    return envs::Action{int(envs::VgwAction::Stay), 0.0};
  };

  ShieldConfig abps;
  abps.horizon = 2;
  abps.samples = 8;
  abps.epsilon = 0.15;
  abps.action_noise_var = 0.0;
  for (int a = 0; a < envs::kVgwActions; a++) abps.candidates.push_back(envs::Action{a, 0.0});

  OracleConfig oracle = vgw_oracle(2);

  long checked = 0;
  for (int cell = 0; cell < size * size; cell++) {
    if (mask[size_t(cell)]) continue;  // the agent never stands on red mid-episode
    place_agent(env, cell % size, cell / size);
    num::Tensor feat({size * size});
    feat.at(cell) = 1.0;
    for (int a = 0; a < envs::kVgwActions; a++) {
      scltl::Monitor monitor(env.safety_spec());
      Rng r1(17), r2(17);
      ShieldDecision latent = abps_filter(ctx, feat, envs::Action{a, 0.0}, abps, r1);
      ShieldDecision exact = oracle_bps_filter(env, monitor, envs::Action{a, 0.0}, oracle, r2);
      CAPTURE(cell);
      CAPTURE(a);
      CHECK(latent.interfered == exact.interfered);
      checked++;
    }
  }
  CHECK(checked == long(size * size - int(red.size())) * envs::kVgwActions);
}
