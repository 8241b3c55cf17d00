#include "selfcheck.hpp"

#include "gradcheck.hpp"
#include "shield.hpp"

namespace ls::selfcheck {

using namespace ls::num;
using scltl::Formula;
using scltl::Valuation;

// ---------------------------------------------------------------------------
// progression vs semantics
// ---------------------------------------------------------------------------

namespace {

std::vector<Formula> enumerate_formulas(size_t max_depth) {
  std::vector<Formula> prev;
  std::vector<Formula> cur = {Formula::True(), Formula::atom("a"), Formula::atom("b"),
                              Formula::not_atom("a"), Formula::not_atom("b")};
  for (size_t d = 2; d <= max_depth; d++) {
    prev = cur;
    cur = {Formula::True(), Formula::atom("a"), Formula::atom("b"), Formula::not_atom("a"),
           Formula::not_atom("b")};
    for (const Formula& f : prev) {
      cur.push_back(Formula::next(f));
      cur.push_back(Formula::eventually(f));
    }
    for (const Formula& f : prev)
      for (const Formula& g : prev) {
        cur.push_back(Formula::land(f, g));
        cur.push_back(Formula::lor(f, g));
        cur.push_back(Formula::until(f, g));
      }
  }
  return cur;
}

struct SweepState {
  SweepResult result;
  std::vector<Valuation> vals;
  std::vector<Valuation> prefix;

  void visit(const Formula& f, const scltl::Monitor& monitor, size_t remaining) {
    if (remaining == 0) return;
    for (const Valuation& v : vals) {
      scltl::Monitor next = monitor;
      next.step(v);
      prefix.push_back(v);
      const scltl::Verdict verdict = scltl::semantic_verdict(f, prefix);
      const scltl::Status status = next.status();
      const bool violated_agree =
          (status == scltl::Status::Unsafe) == (verdict == scltl::Verdict::Violated);
      const bool satisfied_agree =
          (status == scltl::Status::Satisfied) == (verdict == scltl::Verdict::Satisfied);
      result.comparisons++;
      if (!violated_agree || !satisfied_agree) {
        result.mismatches++;
        if (result.first_mismatch.empty())
          result.first_mismatch = f.print() + " at prefix length " +
                                  std::to_string(prefix.size()) + ": monitor " +
                                  scltl::to_string(status) + ", oracle " +
                                  scltl::to_string(verdict);
      }
      visit(f, next, remaining - 1);
      prefix.pop_back();
    }
  }
};

}  // namespace

SweepResult oracle_sweep(size_t depth, size_t trace_len) {
  SweepState state;
  state.vals = {Valuation{}, Valuation{"a"}, Valuation{"b"}, Valuation{"a", "b"}};
  SweepResult total;
  for (const Formula& f : enumerate_formulas(depth)) {
    state.result = SweepResult{};
    state.visit(f, scltl::Monitor(f), trace_len);
    total.formulas++;
    total.comparisons += state.result.comparisons;
    total.mismatches += state.result.mismatches;
    if (total.first_mismatch.empty()) total.first_mismatch = state.result.first_mismatch;
  }
  return total;
}

// ---------------------------------------------------------------------------
// shield mock
// ---------------------------------------------------------------------------

namespace {

// Latent space = 1 scalar carried through imagination; a state is flagged
// unsafe when its carried value crosses a threshold. The first imagine_step
// draws the trajectory's fate uniformly, so per-trajectory unsafe events are
// Bernoulli(p).
class BernoulliMock final : public model::LatentModel {
 public:
  explicit BernoulliMock(real p) : p_(p) {}
  int feat_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  Var imagine_step(Graph& g, Var feat, Var action, Rng& rng) const override {
    (void)action;
    const int n = feat.val().dim(0);
    Tensor draw({n, 1});
    for (int i = 0; i < n; i++) {
      const bool fresh = feat.val().at(i) == 0.0;  // start states carry 0
      draw.at(i) = fresh ? (rng.bernoulli(p_) ? 1.0 : -1.0) : feat.val().at(i);
    }
    return g.input(std::move(draw));
  }
  Var reward_head(Graph& g, Var feat) const override {
    return g.input(Tensor({feat.val().dim(0), 1}));
  }
  Var violation_logit(Graph& g, Var feat) const override {
    const int n = feat.val().dim(0);
    Tensor logit({n, 1});
    for (int i = 0; i < n; i++) logit.at(i) = feat.val().at(i) > 0.0 ? 10.0 : -10.0;
    return g.input(std::move(logit));
  }

 private:
  real p_;
};

shield::LatentShieldContext mock_context(const model::LatentModel& m) {
  shield::LatentShieldContext ctx;
  ctx.model = &m;
  ctx.continuous = false;
  ctx.encode = [](const envs::Action&) { return Tensor({1}); };
  ctx.policy = [](const Tensor&, Rng&) { return envs::Action{}; };
  return ctx;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<CheckResult> run(const Options& opt) {
  std::vector<CheckResult> results;
  auto add = [&results](const std::string& name, bool ok, const std::string& detail) {
    results.push_back({name, ok, detail});
  };

  // gradient checks over the layered primitives
  {
    set_gradcheck_corruption(opt.corrupt_gradient ? 1.0 : 0.0);
    real worst = 0.0;
    std::string worst_name;
    for (uint64_t seed = 0; seed < 20; seed++) {
      Rng rng(seed + 31);
      ParamStore ps;
      GruCell gru(ps, "gru", 3, 4, rng);
      Dense head(ps, "head", 4, 2, rng);
      Tensor h0 = Tensor::randn({2, 4}, rng);
      Tensor x0 = Tensor::randn({2, 3}, rng);
      Tensor labels({2, 2});
      for (long i = 0; i < 4; i++) labels.at(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      auto f = [&](Graph& g) {
        Var h = gru(g, g.input(h0), g.input(x0));
        return weighted_bce(head(g, h), labels, 3.0);
      };
      auto report = grad_check(f, ps);
      if (report.max_rel_error > worst) {
        worst = report.max_rel_error;
        worst_name = report.worst_param;
      }
    }
    set_gradcheck_corruption(0.0);
    add("gradient_check", worst < 1e-4,
        "max relative error " + std::to_string(worst) +
            (worst_name.empty() ? "" : " at " + worst_name));
  }

  // KL identities
  {
    Graph g;
    auto kl = [&g](real qm, real qs, real pm, real psd) {
      return kl_diag_gaussian(g.input(Tensor({1, 1}, {qm})), g.input(Tensor({1, 1}, {qs})),
                              g.input(Tensor({1, 1}, {pm})), g.input(Tensor({1, 1}, {psd})))
          .val()
          .at(0);
    };
    const real self_kl = std::fabs(kl(0.37, 1.21, 0.37, 1.21));
    bool nonneg = true;
    Rng rng(5);
    for (int i = 0; i < 200; i++)
      if (kl(rng.uniform(-3, 3), rng.uniform(0.1, 3), rng.uniform(-3, 3),
             rng.uniform(0.1, 3)) < -1e-12)
        nonneg = false;
    add("kl_identities", self_kl < 1e-9 && nonneg,
        "KL(q||q) = " + std::to_string(self_kl) + (nonneg ? "" : ", negative KL found"));
  }

  // progression vs semantic oracle
  {
    SweepResult sweep = oracle_sweep(opt.formula_depth, opt.trace_length);
    add("progression_oracle",
        sweep.mismatches == 0 && sweep.comparisons > 0,
        std::to_string(sweep.formulas) + " formulas, " + std::to_string(sweep.comparisons) +
            " prefixes" +
            (sweep.mismatches ? ", first mismatch: " + sweep.first_mismatch : ""));
  }

  // shield mock properties
  {
    BernoulliMock safe(0.0), doomed(1.0), coin(0.3);
    shield::ShieldConfig cfg;
    cfg.horizon = 2;
    cfg.samples = 50;
    cfg.epsilon = 0.15;
    cfg.action_noise_var = 0.0;
    for (int a = 0; a < 3; a++) cfg.candidates.push_back(envs::Action{a, 0.0});
    Tensor start({1});

    Rng rng(99);
    auto ctx_safe = mock_context(safe);
    shield::ShieldDecision d_safe =
        shield::abps_filter(ctx_safe, start, envs::Action{1, 0.0}, cfg, rng);
    const bool pass_through = !d_safe.interfered && d_safe.action.idx == 1;

    auto ctx_doomed = mock_context(doomed);
    shield::ShieldDecision d_doomed =
        shield::abps_filter(ctx_doomed, start, envs::Action{1, 0.0}, cfg, rng);
    const bool fallback = d_doomed.interfered;

    auto ctx_coin = mock_context(coin);
    cfg.samples = 400;
    const real est = shield::estimate_violation_probability(ctx_coin, start,
                                                            envs::Action{0, 0.0}, cfg, rng);
    const bool estimator_ok = std::fabs(est - 0.3) < 0.08;

    add("shield_mock", pass_through && fallback && estimator_ok,
        "risk estimate on Bernoulli(0.3) mock: " + std::to_string(est));
  }

  return results;
}

}  // namespace ls::selfcheck
