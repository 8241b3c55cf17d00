#include "oracle_shield.hpp"

namespace ls::shield {

namespace {

struct OracleSearch {
  envs::Environment& env;
  const OracleConfig& cfg;
  uint64_t draw_base;
  long steps_used = 0;

  void charge(long n) {
    steps_used += n;
    if (steps_used > cfg.node_budget)
      throw Error("oracle_bps_filter: node budget exceeded (" +
                  std::to_string(cfg.node_budget) + " simulated steps)");
  }

  // Simulates one fixed action sequence from `snapshot` under one rng draw.
  // Safe iff the monitor never turns unsafe within the sequence (a terminal
  // state before the horizon ends the trajectory).
  bool sequence_safe_one_draw(const std::shared_ptr<const void>& snapshot,
                              const scltl::Monitor& monitor0,
                              const std::vector<envs::Action>& seq, uint64_t draw_key) {
    env.load_state(snapshot);
    env.reseed_stream(draw_key);
    scltl::Monitor monitor = monitor0;
    for (const envs::Action& a : seq) {
      charge(1);
      envs::LiteStep step = env.step_lite(a);
      monitor.step(step.valuation);
      if (monitor.status() == scltl::Status::Unsafe) return false;
      if (step.done) break;
    }
    return true;
  }

  bool sequence_safe(const std::shared_ptr<const void>& snapshot,
                     const scltl::Monitor& monitor0, const std::vector<envs::Action>& seq,
                     long seq_index) {
    for (int k = 0; k < cfg.draws; k++) {
      const uint64_t key =
          splitmix64(draw_base ^ (uint64_t(seq_index) * 0x100000001b3ULL + uint64_t(k)));
      if (!sequence_safe_one_draw(snapshot, monitor0, seq, key)) return false;
    }
    return true;
  }

  // Does some completion of `first` (total length <= H) avoid all violations?
  bool exists_safe_completion(const std::shared_ptr<const void>& snapshot,
                              const scltl::Monitor& monitor0, const envs::Action& first) {
    std::vector<envs::Action> seq = {first};
    long seq_index = 0;
    return dfs(snapshot, monitor0, seq, seq_index);
  }

  bool dfs(const std::shared_ptr<const void>& snapshot, const scltl::Monitor& monitor0,
           std::vector<envs::Action>& seq, long& seq_index) {
    if (int(seq.size()) == cfg.horizon) return sequence_safe(snapshot, monitor0, seq, seq_index++);
    // Trying the full-length extensions subsumes shorter prefixes: a draw
    // that terminates early stops consuming actions, so any safe short
    // trajectory is discovered through its extensions.
    for (const envs::Action& a : cfg.candidates) {
      seq.push_back(a);
      const bool ok = dfs(snapshot, monitor0, seq, seq_index);
      seq.pop_back();
      if (ok) return true;
    }
    return false;
  }
};

bool actions_equal(const envs::Action& a, const envs::Action& b, bool continuous) {
  return continuous ? a.value == b.value : a.idx == b.idx;
}

}  // namespace

ShieldDecision oracle_bps_filter(envs::Environment& env, const scltl::Monitor& monitor,
                                 const envs::Action& proposed, const OracleConfig& cfg,
                                 Rng& rng) {
  cfg.validate();
  const bool continuous = !env.discrete();
  const std::shared_ptr<const void> snapshot = env.save_state();
  OracleSearch search{env, cfg, rng.next_u64(), 0};

  ShieldDecision decision;
  auto restore = [&]() { env.load_state(snapshot); };

  if (monitor.status() != scltl::Status::Safe) {
    // Resolved specification: nothing left to protect.
    decision.action = proposed;
    decision.interfered = false;
    restore();
    return decision;
  }

  if (search.exists_safe_completion(snapshot, monitor, proposed)) {
    decision.action = proposed;
    decision.interfered = false;
    decision.risk = 0.0;
    decision.evaluated.push_back({proposed, 0.0});
    restore();
    return decision;
  }
  decision.evaluated.push_back({proposed, 1.0});

  for (const envs::Action& c : cfg.candidates) {
    if (actions_equal(c, proposed, continuous)) continue;
    if (search.exists_safe_completion(snapshot, monitor, c)) {
      decision.action = c;
      decision.interfered = true;
      decision.risk = 0.0;
      decision.evaluated.push_back({c, 0.0});
      restore();
      return decision;
    }
    decision.evaluated.push_back({c, 1.0});
  }

  // Violation inevitable within the horizon: every action is admissible under
  // the bounded-safety definition, so do not interfere.
  decision.action = proposed;
  decision.interfered = false;
  decision.risk = 1.0;
  restore();
  return decision;
}

// ---------------------------------------------------------------------------

BoundedSafetyResult check_bounded_safety(const ExplicitMdp& mdp,
                                         const std::function<int(int)>& policy, int H,
                                         const scltl::Formula& spec) {
  check(mdp.n_states >= 1 && mdp.n_actions >= 1, "check_bounded_safety: empty MDP");
  check(H >= 1, "check_bounded_safety: H must be >= 1");

  std::vector<uint8_t> unsafe(size_t(mdp.n_states));
  for (int s = 0; s < mdp.n_states; s++)
    unsafe[size_t(s)] = scltl::progress(spec, mdp.valuation(s)).is_false() ? 1 : 0;
  auto is_terminal = [&](int s) { return mdp.terminal && mdp.terminal(s); };

  long budget = mdp.node_budget;
  auto charge = [&budget]() {
    if (--budget < 0) throw Error("check_bounded_safety: state-space budget exceeded");
  };

  // exists_safe(s, k): some trajectory of at most k states starting at s
  // stays safe throughout.
  std::function<bool(int, int)> exists_safe = [&](int s, int k) -> bool {
    charge();
    if (unsafe[size_t(s)]) return false;
    if (k == 1 || is_terminal(s)) return true;
    for (int a = 0; a < mdp.n_actions; a++)
      if (exists_safe(mdp.next(s, a), k - 1)) return true;
    return false;
  };

  for (int s = 0; s < mdp.n_states; s++) {
    // First bullet: a safe bounded trajectory whose first action is pi(s).
    bool with_policy = false;
    if (!unsafe[size_t(s)]) {
      if (H == 1 || is_terminal(s))
        with_policy = true;  // the one-state trajectory carries no action constraint
      else
        with_policy = exists_safe(mdp.next(s, policy(s)), H - 1);
    }
    if (with_policy) continue;

    // Second bullet: every bounded trajectory from s violates.
    bool any_safe = false;
    if (!unsafe[size_t(s)]) {
      if (H == 1 || is_terminal(s)) {
        any_safe = true;
      } else {
        for (int a = 0; a < mdp.n_actions && !any_safe; a++)
          any_safe = exists_safe(mdp.next(s, a), H - 1);
      }
    }
    if (!any_safe) continue;  // inevitable: policy is off the hook

    return {false, s};
  }
  return {true, -1};
}

ExplicitMdp grid_mdp(int width, int height, const std::vector<uint8_t>& unsafe_mask) {
  check(int(unsafe_mask.size()) == width * height, "grid_mdp: mask size mismatch");
  ExplicitMdp mdp;
  mdp.n_states = width * height;
  mdp.n_actions = envs::kVgwActions;
  mdp.next = [width, height](int s, int a) {
    int x = s % width, y = s / width;
    switch (envs::VgwAction(a)) {
      case envs::VgwAction::Up:
        y--;
        break;
      case envs::VgwAction::Down:
        y++;
        break;
      case envs::VgwAction::Left:
        x--;
        break;
      case envs::VgwAction::Right:
        x++;
        break;
      case envs::VgwAction::Stay:
        break;
    }
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return y * width + x;
  };
  mdp.valuation = [mask = unsafe_mask](int s) {
    scltl::Valuation v;
    if (mask[size_t(s)]) v.set(envs::kPropRed);
    return v;
  };
  return mdp;
}

}  // namespace ls::shield
