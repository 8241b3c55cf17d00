#pragma once

#include <string>
#include <vector>

namespace ls::selfcheck {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Options {
  bool corrupt_gradient = false;  // test hook: sabotage one gradient on purpose
  size_t formula_depth = 3;       // progression-vs-semantics sweep depth
  size_t trace_length = 5;
};

// Gradient checks, KL identities, the exhaustive progression-vs-semantics
// suite and the shield mock properties. Returns one entry per check.
std::vector<CheckResult> run(const Options& opt);

struct SweepResult {
  long formulas = 0;
  long comparisons = 0;
  long mismatches = 0;
  std::string first_mismatch;
};

// Exhaustive agreement check between iterated monitor progression and the
// finite-trace semantic oracle: every grammar formula up to `depth` over two
// propositions against every trace up to `trace_len` steps.
SweepResult oracle_sweep(size_t depth, size_t trace_len);

}  // namespace ls::selfcheck
