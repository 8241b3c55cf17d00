#include "shield.hpp"

namespace ls::shield {

using num::Graph;
using num::Tensor;
using num::Var;

real estimate_violation_probability(const LatentShieldContext& ctx, const Tensor& feat,
                                    const envs::Action& first_action, const ShieldConfig& cfg,
                                    Rng& rng) {
  cfg.validate();
  const model::LatentModel& m = *ctx.model;
  const uint64_t base = rng.next_u64();
  const real noise_std = ctx.continuous ? std::sqrt(cfg.action_noise_var) : 0.0;

  int unsafe = 0;
  for (int n = 0; n < cfg.samples; n++) {
    Rng sample_rng(splitmix64(base + uint64_t(n) * 0x9e3779b97f4a7c15ULL));
    Graph g;
    Var state = g.input(num::as_row(feat));
    envs::Action action = first_action;
    for (int i = 0; i < cfg.horizon; i++) {
      Var enc = g.input(num::as_row(ctx.encode(action)));
      state = m.imagine_step(g, state, enc, sample_rng);
      const real logit = m.violation_logit(g, state).val().at(0);
      if (logit >= 0.0) {  // sigmoid(logit) >= 0.5: the hard label says unsafe
        unsafe++;
        break;
      }
      if (i + 1 < cfg.horizon) {
        action = ctx.policy(state.val(), sample_rng);
        if (noise_std > 0.0)
          action.value = std::clamp(action.value + noise_std * sample_rng.normal(), -1.0, 1.0);
      }
    }
  }
  return real(unsafe) / real(cfg.samples);
}

namespace {

bool same_action(const envs::Action& a, const envs::Action& b, bool continuous) {
  return continuous ? a.value == b.value : a.idx == b.idx;
}

}  // namespace

ShieldDecision abps_filter(const LatentShieldContext& ctx, const Tensor& feat,
                           const envs::Action& proposed, const ShieldConfig& cfg, Rng& rng) {
  cfg.validate();
  check(!cfg.candidates.empty(), "abps_filter: empty candidate set");

  ShieldDecision decision;
  auto risk_of = [&](const envs::Action& a) -> real {
    for (const CandidateRisk& c : decision.evaluated)  // memoised within this call
      if (same_action(c.action, a, ctx.continuous)) return c.risk;
    const real risk = estimate_violation_probability(ctx, feat, a, cfg, rng);
    decision.evaluated.push_back({a, risk});
    return risk;
  };

  const real proposed_risk = risk_of(proposed);
  if (!(proposed_risk > cfg.epsilon)) {  // interfere strictly when risk > epsilon
    decision.action = proposed;
    decision.interfered = false;
    decision.risk = proposed_risk;
    return decision;
  }

  decision.interfered = true;
  std::vector<envs::Action> alternatives;
  for (const envs::Action& c : cfg.candidates)
    if (!same_action(c, proposed, ctx.continuous)) alternatives.push_back(c);
  if (ctx.continuous) {
    envs::Action negated;
    negated.value = -proposed.value;
    if (!same_action(negated, proposed, true)) alternatives.push_back(negated);
  }
  check(!alternatives.empty(), "abps_filter: no alternative candidates");

  for (const envs::Action& c : alternatives) {
    const real risk = risk_of(c);
    if (risk <= cfg.epsilon) {
      decision.action = c;
      decision.risk = risk;
      return decision;
    }
  }

  // nothing qualifies: random candidate
  const envs::Action pick = alternatives[size_t(rng.bounded(alternatives.size()))];
  decision.action = pick;
  decision.risk = risk_of(pick);
  return decision;
}

real epsilon_at(const EpsilonSchedule& schedule, long step) {
  schedule.validate();
  check(step >= 0, "epsilon_at: negative step");
  if (schedule.mode == EpsilonSchedule::Mode::Constant) return schedule.start;
  const real frac = std::min(1.0, real(step) / real(schedule.total_steps));
  return schedule.start + (schedule.end - schedule.start) * frac;
}

}  // namespace ls::shield
