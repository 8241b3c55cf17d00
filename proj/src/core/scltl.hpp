#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"

namespace ls::scltl {

// Syntactically co-safe LTL over a finite alphabet of propositions:
//   f ::= true | d | !d | f & f | f | f | X f | f U f | <> f
// Negation is restricted to atoms. A distinguished False value exists but is
// only reachable through progression / simplification, never from the parser
// grammar (the parser still accepts the keyword `false` so that printed
// residuals round-trip).

enum class Kind : uint8_t {
  True,
  False,
  Atom,
  NotAtom,
  And,
  Or,
  Next,
  Until,
  Eventually,
};

class Formula {
 public:
  Formula() : Formula(True()) {}

  static Formula True();
  static Formula False();
  static Formula atom(const std::string& name);
  static Formula not_atom(const std::string& name);
  static Formula land(Formula lhs, Formula rhs);
  static Formula lor(Formula lhs, Formula rhs);
  static Formula next(Formula sub);
  static Formula until(Formula lhs, Formula rhs);
  static Formula eventually(Formula sub);

  Kind kind() const { return node_->kind; }
  const std::string& name() const { return node_->name; }  // Atom / NotAtom
  Formula lhs() const { return Formula(node_->lhs); }      // also unary sub
  Formula rhs() const { return Formula(node_->rhs); }

  bool is_true() const { return kind() == Kind::True; }
  bool is_false() const { return kind() == Kind::False; }

  bool operator==(const Formula& other) const;
  bool operator!=(const Formula& other) const { return !(*this == other); }

  // Concrete syntax; parse(print(f)) == f.
  std::string print() const;

  // Atoms occurring in the formula, sorted and deduplicated.
  std::vector<std::string> atoms() const;

  size_t depth() const;

 private:
  struct Node {
    Kind kind;
    std::string name;
    std::shared_ptr<const Node> lhs, rhs;
  };
  using NodePtr = std::shared_ptr<const Node>;

  explicit Formula(NodePtr n) : node_(std::move(n)) {}
  static Formula make(Kind k, std::string name, NodePtr l, NodePtr r);

  NodePtr node_;
};

// Set of propositions true at one step. Membership is total: anything not in
// the set is false.
class Valuation {
 public:
  Valuation() = default;
  Valuation(std::initializer_list<std::string> props) : props_(props) {}
  explicit Valuation(std::set<std::string> props) : props_(std::move(props)) {}

  bool holds(const std::string& prop) const { return props_.count(prop) > 0; }
  void set(const std::string& prop) { props_.insert(prop); }
  const std::set<std::string>& props() const { return props_; }

  bool operator==(const Valuation& o) const { return props_ == o.props_; }

 private:
  std::set<std::string> props_;
};

// Boolean absorption/identity/idempotence rules to a fixpoint. Purely
// syntactic: the result is True/False whenever these local rules alone decide
// the formula.
Formula simplify(const Formula& f);

// One-step progression followed by simplify.
//   prog(true) = true, prog(d) = [d in v], prog(!d) = [d not in v],
//   prog(f|g), prog(f&g) distribute, prog(X f) = f,
//   prog(f U g) = prog(g) | (prog(f) & (f U g)),
//   prog(<> f) = prog(f) | <> f.
Formula progress(const Formula& f, const Valuation& v);

enum class Status : uint8_t { Safe, Unsafe, Satisfied };

const char* to_string(Status s);

// Progression-based runtime monitor. Status latches: once Unsafe or
// Satisfied it never changes (stepping a resolved monitor is a no-op).
class Monitor {
 public:
  explicit Monitor(Formula spec);

  const Formula& current() const { return current_; }
  Status status() const { return status_; }

  void step(const Valuation& v);

 private:
  Formula current_;
  Status status_;
};

enum class Verdict : uint8_t { Satisfied, Violated, Pending };

const char* to_string(Verdict v);

// Brute-force finite-trace evaluation via the expansion laws. Kept
// independent of progress/Monitor; it is the oracle the progression path is
// tested against. Next consumes one step; Until/Eventually must be witnessed
// within the trace; anything unresolved when the trace ends is Pending.
Verdict semantic_verdict(const Formula& f, const std::vector<Valuation>& trace);

// Parses the concrete syntax. Precedence: ! > X, <> > & > | > U, with U
// right-associative. Every atom must be in `alphabet` (empty alphabet skips
// the check). Throws ParseError with a byte offset on bad syntax and on
// unknown propositions.
Formula parse(const std::string& text, const std::vector<std::string>& alphabet = {});

// Trace file format: one line per step with comma-separated proposition
// names (empty line = empty valuation); '#' starts a comment line. Unknown
// propositions (when an alphabet is given) raise ParseError.
std::vector<Valuation> parse_trace(const std::string& text,
                                   const std::vector<std::string>& alphabet = {});

}  // namespace ls::scltl
