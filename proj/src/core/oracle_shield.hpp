#pragma once

#include "scltl.hpp"
#include "shield.hpp"

namespace ls::shield {

struct OracleConfig {
  int horizon = 2;                     // H
  std::vector<envs::Action> candidates;  // branch/alternative action set
  int draws = 8;                       // re-simulations per sequence (stochastic envs)
  long node_budget = 4'000'000;        // max simulated steps per filter call

  void validate() const {
    check(horizon >= 1, "oracle: horizon must be >= 1");
    check(!candidates.empty(), "oracle: empty candidate set");
    check(draws >= 1, "oracle: draws must be >= 1");
  }
};

// Exact bounded-prescience filter on the true simulator. Accepts `proposed`
// iff some completion of length <= H from the cloned environment avoids all
// violations (judged by progressing `monitor`); otherwise hands the first
// candidate that has a safe completion back. If every action is doomed the
// violation is inevitable, and by the bounded-safety definition any action is
// admissible: the proposed action is returned uninterfered.
//
// Stochastic environments re-simulate each action sequence over `draws`
// derived rng streams and call the sequence unsafe if any draw violates.
// Throws when the step budget is exhausted.
ShieldDecision oracle_bps_filter(envs::Environment& env, const scltl::Monitor& monitor,
                                 const envs::Action& proposed, const OracleConfig& cfg,
                                 Rng& rng);

// ---------------------------------------------------------------------------
// H-bounded safety on explicit MDPs
// ---------------------------------------------------------------------------

struct ExplicitMdp {
  int n_states = 0;
  int n_actions = 0;
  std::function<int(int state, int action)> next;
  std::function<scltl::Valuation(int state)> valuation;
  std::function<bool(int state)> terminal;  // optional; nullptr = no terminals
  long node_budget = 50'000'000;
};

struct BoundedSafetyResult {
  bool holds = true;
  int counterexample = -1;  // first failing state when holds is false
};

// Checks that `policy` is H-bounded safe w.r.t. `spec`: for every state,
// either some bounded trajectory of at most H states starting with the
// policy's action stays safe throughout, or every bounded trajectory from
// that state violates. A state is unsafe iff one-step progression of `spec`
// against its valuation yields false.
BoundedSafetyResult check_bounded_safety(const ExplicitMdp& mdp,
                                         const std::function<int(int)>& policy, int H,
                                         const scltl::Formula& spec);

// Grid-world shaped explicit MDP (agent position only, walls clamp); handy
// for the verifier and its tests.
ExplicitMdp grid_mdp(int width, int height, const std::vector<uint8_t>& unsafe_mask);

}  // namespace ls::shield
