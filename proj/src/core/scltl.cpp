#include "scltl.hpp"

#include <algorithm>
#include <cctype>

namespace ls::scltl {

// ---------------------------------------------------------------------------
// Formula
// ---------------------------------------------------------------------------

Formula Formula::make(Kind k, std::string name, NodePtr l, NodePtr r) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->name = std::move(name);
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  return Formula(NodePtr(std::move(n)));
}

Formula Formula::True() {
  static const Formula t = make(Kind::True, "", nullptr, nullptr);
  return t;
}

Formula Formula::False() {
  static const Formula f = make(Kind::False, "", nullptr, nullptr);
  return f;
}

Formula Formula::atom(const std::string& name) {
  return make(Kind::Atom, name, nullptr, nullptr);
}

Formula Formula::not_atom(const std::string& name) {
  return make(Kind::NotAtom, name, nullptr, nullptr);
}

Formula Formula::land(Formula l, Formula r) {
  return make(Kind::And, "", std::move(l.node_), std::move(r.node_));
}

Formula Formula::lor(Formula l, Formula r) {
  return make(Kind::Or, "", std::move(l.node_), std::move(r.node_));
}

Formula Formula::next(Formula sub) {
  return make(Kind::Next, "", std::move(sub.node_), nullptr);
}

Formula Formula::until(Formula l, Formula r) {
  return make(Kind::Until, "", std::move(l.node_), std::move(r.node_));
}

Formula Formula::eventually(Formula sub) {
  return make(Kind::Eventually, "", std::move(sub.node_), nullptr);
}

bool Formula::operator==(const Formula& other) const {
  if (node_ == other.node_) return true;
  if (kind() != other.kind()) return false;
  switch (kind()) {
    case Kind::True:
    case Kind::False:
      return true;
    case Kind::Atom:
    case Kind::NotAtom:
      return name() == other.name();
    case Kind::Next:
    case Kind::Eventually:
      return lhs() == other.lhs();
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
      return lhs() == other.lhs() && rhs() == other.rhs();
  }
  return false;
}

size_t Formula::depth() const {
  switch (kind()) {
    case Kind::True:
    case Kind::False:
    case Kind::Atom:
    case Kind::NotAtom:
      return 1;
    case Kind::Next:
    case Kind::Eventually:
      return 1 + lhs().depth();
    default:
      return 1 + std::max(lhs().depth(), rhs().depth());
  }
}

namespace {

void collect_atoms(const Formula& f, std::set<std::string>& out) {
  switch (f.kind()) {
    case Kind::Atom:
    case Kind::NotAtom:
      out.insert(f.name());
      return;
    case Kind::Next:
    case Kind::Eventually:
      collect_atoms(f.lhs(), out);
      return;
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
      collect_atoms(f.lhs(), out);
      collect_atoms(f.rhs(), out);
      return;
    default:
      return;
  }
}

// Binding strength used when printing; parentheses are emitted whenever a
// child binds no tighter than its parent requires.
int print_level(Kind k) {
  switch (k) {
    case Kind::Until:
      return 0;
    case Kind::Or:
      return 1;
    case Kind::And:
      return 2;
    case Kind::Next:
    case Kind::Eventually:
      return 3;
    default:
      return 4;  // atoms, literals, constants
  }
}

void print_rec(const Formula& f, int min_level, std::string& out) {
  const int lvl = print_level(f.kind());
  const bool parens = lvl < min_level;
  if (parens) out += '(';
  switch (f.kind()) {
    case Kind::True:
      out += "true";
      break;
    case Kind::False:
      out += "false";
      break;
    case Kind::Atom:
      out += f.name();
      break;
    case Kind::NotAtom:
      out += '!';
      out += f.name();
      break;
    case Kind::Next:
      out += "X ";
      print_rec(f.lhs(), 3, out);
      break;
    case Kind::Eventually:
      out += "<> ";
      print_rec(f.lhs(), 3, out);
      break;
    case Kind::And:
      print_rec(f.lhs(), 2, out);
      out += " & ";
      print_rec(f.rhs(), 3, out);  // right child must bind tighter: & is left-assoc
      break;
    case Kind::Or:
      print_rec(f.lhs(), 1, out);
      out += " | ";
      print_rec(f.rhs(), 2, out);
      break;
    case Kind::Until:
      print_rec(f.lhs(), 1, out);  // U is right-associative
      out += " U ";
      print_rec(f.rhs(), 0, out);
      break;
  }
  if (parens) out += ')';
}

}  // namespace

std::string Formula::print() const {
  std::string out;
  print_rec(*this, 0, out);
  return out;
}

std::vector<std::string> Formula::atoms() const {
  std::set<std::string> s;
  collect_atoms(*this, s);
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// Simplification
// ---------------------------------------------------------------------------

namespace {

// Local rules at one node whose children are already simplified.
Formula simplify_node(const Formula& f) {
  switch (f.kind()) {
    case Kind::Or: {
      Formula l = f.lhs(), r = f.rhs();
      if (l.is_true() || r.is_true()) return Formula::True();
      if (l.is_false()) return r;
      if (r.is_false()) return l;
      if (l == r) return l;
      return f;
    }
    case Kind::And: {
      Formula l = f.lhs(), r = f.rhs();
      if (l.is_false() || r.is_false()) return Formula::False();
      if (l.is_true()) return r;
      if (r.is_true()) return l;
      if (l == r) return l;
      return f;
    }
    default:
      return f;
  }
}

}  // namespace

Formula simplify(const Formula& f) {
  switch (f.kind()) {
    case Kind::And:
    case Kind::Or: {
      Formula l = simplify(f.lhs());
      Formula r = simplify(f.rhs());
      Formula rebuilt = (f.kind() == Kind::And) ? Formula::land(l, r) : Formula::lor(l, r);
      return simplify_node(rebuilt);
    }
    case Kind::Next: {
      Formula s = simplify(f.lhs());
      return Formula::next(s);
    }
    case Kind::Eventually: {
      Formula s = simplify(f.lhs());
      return Formula::eventually(s);
    }
    case Kind::Until: {
      Formula l = simplify(f.lhs());
      Formula r = simplify(f.rhs());
      return Formula::until(l, r);
    }
    default:
      return f;
  }
}

// ---------------------------------------------------------------------------
// Progression
// ---------------------------------------------------------------------------

namespace {

Formula progress_raw(const Formula& f, const Valuation& v) {
  switch (f.kind()) {
    case Kind::True:
      return Formula::True();
    case Kind::False:
      return Formula::False();
    case Kind::Atom:
      return v.holds(f.name()) ? Formula::True() : Formula::False();
    case Kind::NotAtom:
      return v.holds(f.name()) ? Formula::False() : Formula::True();
    case Kind::Or:
      return Formula::lor(progress_raw(f.lhs(), v), progress_raw(f.rhs(), v));
    case Kind::And:
      return Formula::land(progress_raw(f.lhs(), v), progress_raw(f.rhs(), v));
    case Kind::Next:
      return f.lhs();
    case Kind::Until:
      return Formula::lor(progress_raw(f.rhs(), v),
                          Formula::land(progress_raw(f.lhs(), v), f));
    case Kind::Eventually:
      return Formula::lor(progress_raw(f.lhs(), v), f);
  }
  return f;
}

}  // namespace

Formula progress(const Formula& f, const Valuation& v) {
  return simplify(progress_raw(f, v));
}

// ---------------------------------------------------------------------------
// Monitor
// ---------------------------------------------------------------------------

const char* to_string(Status s) {
  switch (s) {
    case Status::Safe:
      return "safe";
    case Status::Unsafe:
      return "unsafe";
    case Status::Satisfied:
      return "satisfied";
  }
  return "?";
}

namespace {

Status status_of(const Formula& f) {
  if (f.is_true()) return Status::Satisfied;
  if (f.is_false()) return Status::Unsafe;
  return Status::Safe;
}

}  // namespace

Monitor::Monitor(Formula spec) : current_(simplify(spec)) { status_ = status_of(current_); }

void Monitor::step(const Valuation& v) {
  if (status_ != Status::Safe) return;  // resolved monitors are inert
  current_ = progress(current_, v);
  status_ = status_of(current_);
}

// ---------------------------------------------------------------------------
// Semantic oracle
// ---------------------------------------------------------------------------

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Satisfied:
      return "satisfied";
    case Verdict::Violated:
      return "violated";
    case Verdict::Pending:
      return "pending";
  }
  return "?";
}

namespace {

Verdict lor3(Verdict a, Verdict b) {
  if (a == Verdict::Satisfied || b == Verdict::Satisfied) return Verdict::Satisfied;
  if (a == Verdict::Violated && b == Verdict::Violated) return Verdict::Violated;
  return Verdict::Pending;
}

Verdict land3(Verdict a, Verdict b) {
  if (a == Verdict::Violated || b == Verdict::Violated) return Verdict::Violated;
  if (a == Verdict::Satisfied && b == Verdict::Satisfied) return Verdict::Satisfied;
  return Verdict::Pending;
}

// Verdict of a formula past the end of the trace: boolean structure over
// constants is decided, atoms and temporal operators await unseen steps.
Verdict eval_at_end(const Formula& f) {
  switch (f.kind()) {
    case Kind::True:
      return Verdict::Satisfied;
    case Kind::False:
      return Verdict::Violated;
    case Kind::And:
      return land3(eval_at_end(f.lhs()), eval_at_end(f.rhs()));
    case Kind::Or:
      return lor3(eval_at_end(f.lhs()), eval_at_end(f.rhs()));
    default:
      return Verdict::Pending;
  }
}

Verdict eval(const Formula& f, const std::vector<Valuation>& trace, size_t pos) {
  if (pos >= trace.size()) return eval_at_end(f);
  switch (f.kind()) {
    case Kind::True:
      return Verdict::Satisfied;
    case Kind::False:
      return Verdict::Violated;
    case Kind::Atom:
      return trace[pos].holds(f.name()) ? Verdict::Satisfied : Verdict::Violated;
    case Kind::NotAtom:
      return trace[pos].holds(f.name()) ? Verdict::Violated : Verdict::Satisfied;
    case Kind::Or:
      return lor3(eval(f.lhs(), trace, pos), eval(f.rhs(), trace, pos));
    case Kind::And:
      return land3(eval(f.lhs(), trace, pos), eval(f.rhs(), trace, pos));
    case Kind::Next:
      return eval(f.lhs(), trace, pos + 1);
    case Kind::Until:
      // f1 U f2 = f2 | (f1 & X(f1 U f2))
      return lor3(eval(f.rhs(), trace, pos),
                  land3(eval(f.lhs(), trace, pos), eval(f, trace, pos + 1)));
    case Kind::Eventually:
      return lor3(eval(f.lhs(), trace, pos), eval(f, trace, pos + 1));
  }
  return Verdict::Pending;
}

}  // namespace

Verdict semantic_verdict(const Formula& f, const std::vector<Valuation>& trace) {
  check(!trace.empty(), "semantic_verdict requires a nonempty trace");
  return eval(f, trace, 0);
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum Type { True, False, Ident, Not, And, Or, Next, Until, Eventually, LParen, RParen, End };
  Type type;
  std::string text;
  size_t offset;
};

struct Lexer {
  const std::string& src;
  size_t pos = 0;

  explicit Lexer(const std::string& s) : src(s) {}

  Token next() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) pos++;
    const size_t start = pos;
    if (pos >= src.size()) return {Token::End, "", start};
    const char c = src[pos];
    if (c == '!') {
      pos++;
      return {Token::Not, "!", start};
    }
    if (c == '&') {
      pos++;
      return {Token::And, "&", start};
    }
    if (c == '|') {
      pos++;
      return {Token::Or, "|", start};
    }
    if (c == '(') {
      pos++;
      return {Token::LParen, "(", start};
    }
    if (c == ')') {
      pos++;
      return {Token::RParen, ")", start};
    }
    if (c == '<') {
      if (pos + 1 < src.size() && src[pos + 1] == '>') {
        pos += 2;
        return {Token::Eventually, "<>", start};
      }
      throw ParseError("expected '<>'", start);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t end = pos;
      while (end < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[end])) || src[end] == '_'))
        end++;
      std::string word = src.substr(pos, end - pos);
      pos = end;
      if (word == "true") return {Token::True, word, start};
      if (word == "false") return {Token::False, word, start};
      if (word == "X") return {Token::Next, word, start};
      if (word == "U") return {Token::Until, word, start};
      return {Token::Ident, word, start};
    }
    throw ParseError(std::string("unexpected character '") + c + "'", start);
  }
};

// Recursive descent, lowest precedence first:
//   until := or (U until)?          (right-assoc)
//   or    := and (| and)*
//   and   := unary (& unary)*
//   unary := X unary | <> unary | primary
//   primary := true | false | ident | !ident | ( until )
struct Parser {
  Lexer lex;
  Token tok;
  const std::vector<std::string>& alphabet;

  Parser(const std::string& s, const std::vector<std::string>& alpha)
      : lex(s), alphabet(alpha) {
    tok = lex.next();
  }

  void advance() { tok = lex.next(); }

  void expect(Token::Type t, const char* what) {
    if (tok.type != t) throw ParseError(std::string("expected ") + what, tok.offset);
    advance();
  }

  void check_atom(const std::string& name, size_t offset) {
    if (alphabet.empty()) return;
    if (std::find(alphabet.begin(), alphabet.end(), name) == alphabet.end())
      throw ParseError("unknown proposition '" + name + "'", offset);
  }

  Formula parse_until() {
    Formula lhs = parse_or();
    if (tok.type == Token::Until) {
      advance();
      return Formula::until(lhs, parse_until());
    }
    return lhs;
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (tok.type == Token::Or) {
      advance();
      f = Formula::lor(f, parse_and());
    }
    return f;
  }

  Formula parse_and() {
    Formula f = parse_unary();
    while (tok.type == Token::And) {
      advance();
      f = Formula::land(f, parse_unary());
    }
    return f;
  }

  Formula parse_unary() {
    if (tok.type == Token::Next) {
      advance();
      return Formula::next(parse_unary());
    }
    if (tok.type == Token::Eventually) {
      advance();
      return Formula::eventually(parse_unary());
    }
    return parse_primary();
  }

  Formula parse_primary() {
    switch (tok.type) {
      case Token::True:
        advance();
        return Formula::True();
      case Token::False:
        advance();
        return Formula::False();
      case Token::Not: {
        advance();
        if (tok.type != Token::Ident)
          throw ParseError("negation is only permitted on atoms", tok.offset);
        std::string name = tok.text;
        check_atom(name, tok.offset);
        advance();
        return Formula::not_atom(name);
      }
      case Token::Ident: {
        std::string name = tok.text;
        check_atom(name, tok.offset);
        advance();
        return Formula::atom(name);
      }
      case Token::LParen: {
        advance();
        Formula f = parse_until();
        expect(Token::RParen, "')'");
        return f;
      }
      default:
        throw ParseError("expected a formula", tok.offset);
    }
  }
};

}  // namespace

Formula parse(const std::string& text, const std::vector<std::string>& alphabet) {
  Parser p(text, alphabet);
  Formula f = p.parse_until();
  if (p.tok.type != Token::End) throw ParseError("trailing input", p.tok.offset);
  return f;
}

std::vector<Valuation> parse_trace(const std::string& text,
                                   const std::vector<std::string>& alphabet) {
  std::vector<Valuation> trace;
  size_t line_start = 0;
  while (line_start <= text.size()) {
    size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    std::string line = text.substr(line_start, line_end - line_start);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    size_t first = line.find_first_not_of(" \t");
    const bool comment = first != std::string::npos && line[first] == '#';
    const bool at_eof_blank = line_start == text.size();
    if (!comment && !at_eof_blank) {
      std::set<std::string> props;
      size_t item_start = 0;
      bool any = false;
      while (item_start <= line.size()) {
        size_t comma = line.find(',', item_start);
        if (comma == std::string::npos) comma = line.size();
        std::string item = line.substr(item_start, comma - item_start);
        // trim
        size_t b = item.find_first_not_of(" \t");
        size_t e = item.find_last_not_of(" \t");
        item = (b == std::string::npos) ? "" : item.substr(b, e - b + 1);
        if (!item.empty()) {
          if (!alphabet.empty() &&
              std::find(alphabet.begin(), alphabet.end(), item) == alphabet.end())
            throw ParseError("unknown proposition '" + item + "' in trace",
                             line_start + item_start);
          props.insert(item);
          any = true;
        }
        if (comma == line.size()) break;
        item_start = comma + 1;
      }
      (void)any;
      trace.emplace_back(std::move(props));
    }
    if (line_end == text.size()) break;
    line_start = line_end + 1;
  }
  return trace;
}

}  // namespace ls::scltl
