#include "strandweaver/specfile.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

namespace strandweaver {

namespace {

struct Token {
  enum class Kind {
    ident, str, lparen, rparen, lbrace, rbrace, lbracket, rbracket,
    comma, dot, semi, colon, lt, eq_sign, plus, minus, question, arrow, end
  };
  Kind kind;
  std::string text;
  int line = 1, col = 1;
};

class Lexer {
public:
  explicit Lexer(const std::string& text) : s_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= s_.size()) {
        t.kind = Token::Kind::end;
        out.push_back(t);
        return out;
      }
      char c = s_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
          advance();
        if (pos_ < s_.size() && s_[pos_] == '?') advance();
        t.kind = Token::Kind::ident;
        t.text = s_.substr(start, pos_ - start);
        out.push_back(t);
        continue;
      }
      if (c == '"') {
        advance();
        size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != '"') advance();
        t.kind = Token::Kind::str;
        t.text = s_.substr(start, pos_ - start);
        if (pos_ < s_.size()) advance();
        out.push_back(t);
        continue;
      }
      switch (c) {
        case '(': t.kind = Token::Kind::lparen; break;
        case ')': t.kind = Token::Kind::rparen; break;
        case '{': t.kind = Token::Kind::lbrace; break;
        case '}': t.kind = Token::Kind::rbrace; break;
        case '[': t.kind = Token::Kind::lbracket; break;
        case ']': t.kind = Token::Kind::rbracket; break;
        case ',': t.kind = Token::Kind::comma; break;
        case '.': t.kind = Token::Kind::dot; break;
        case ';': t.kind = Token::Kind::semi; break;
        case ':': t.kind = Token::Kind::colon; break;
        case '<': t.kind = Token::Kind::lt; break;
        case '=': t.kind = Token::Kind::eq_sign; break;
        case '+': t.kind = Token::Kind::plus; break;
        case '?': t.kind = Token::Kind::question; break;
        case '-':
          if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '>') {
            advance();
            t.kind = Token::Kind::arrow;
            break;
          }
          t.kind = Token::Kind::minus;
          break;
        default:
          throw SyntaxError(line_, col_, std::string("unexpected character '") + c + "'");
      }
      advance();
      out.push_back(t);
    }
  }

private:
  void advance() {
    if (s_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    for (;;) {
      while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) advance();
      if (pos_ + 1 < s_.size() && s_[pos_] == '-' && s_[pos_ + 1] == '-') {
        while (pos_ < s_.size() && s_[pos_] != '\n') advance();
        continue;
      }
      return;
    }
  }

  const std::string& s_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
public:
  explicit Parser(std::vector<Token> tokens) : ts_(std::move(tokens)) {}

  LoadedSpec run() {
    LoadedSpec spec;
    bool theory_done = false;
    while (!at_end()) {
      if (accept_ident("THEORY")) {
        parse_theory(spec);
        spec.sig.finalize();
        theory_done = true;
        continue;
      }
      if (!theory_done)
        throw SyntaxError(peek().line, peek().col, "expected THEORY section first");
      if (accept_ident("PROCESSES")) {
        parse_processes(spec);
        continue;
      }
      if (accept_ident("STRANDS")) {
        parse_strands(spec);
        continue;
      }
      if (accept_ident("DOMAINS")) {
        parse_domains(spec);
        continue;
      }
      if (accept_ident("ATTACKS")) {
        parse_attacks(spec);
        continue;
      }
      throw SyntaxError(peek().line, peek().col,
                        "expected a section keyword, got '" + peek().text + "'");
    }
    if (!theory_done)
      throw SyntaxError(1, 1, "specification has no THEORY section");
    return spec;
  }

private:
  const Token& peek(int ahead = 0) const {
    size_t i = std::min(pos_ + static_cast<size_t>(ahead), ts_.size() - 1);
    return ts_[i];
  }
  bool at_end() const { return peek().kind == Token::Kind::end; }
  const Token& next() { return ts_[std::min(pos_++, ts_.size() - 1)]; }
  bool check(Token::Kind k) const { return peek().kind == k; }
  bool accept(Token::Kind k) {
    if (!check(k)) return false;
    ++pos_;
    return true;
  }
  void expect(Token::Kind k, const std::string& what) {
    if (!accept(k))
      throw SyntaxError(peek().line, peek().col, "expected " + what + ", got '" +
                        peek().text + "'");
  }
  bool check_ident(const std::string& s) const {
    return peek().kind == Token::Kind::ident && peek().text == s;
  }
  bool accept_ident(const std::string& s) {
    if (!check_ident(s)) return false;
    ++pos_;
    return true;
  }
  std::string expect_ident(const std::string& what) {
    if (!check(Token::Kind::ident))
      throw SyntaxError(peek().line, peek().col, "expected " + what + ", got '" +
                        peek().text + "'");
    return next().text;
  }
  int expect_number(const std::string& what) {
    std::string s = expect_ident(what);
    for (char c : s)
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw SyntaxError(peek().line, peek().col, what + " must be a number, got '" + s + "'");
    return std::stoi(s);
  }
  bool at_section_keyword() const {
    return check_ident("THEORY") || check_ident("PROCESSES") || check_ident("STRANDS") ||
           check_ident("DOMAINS") || check_ident("ATTACKS");
  }

  // ---- THEORY ----

  void parse_theory(LoadedSpec& spec) {
    while (!at_end() && !at_section_keyword()) {
      int line = peek().line, col = peek().col;
      if (accept_ident("sorts") || accept_ident("sort")) {
        while (check(Token::Kind::ident)) spec.sig.add_sort(next().text);
        expect(Token::Kind::dot, "'.'");
        continue;
      }
      if (accept_ident("subsorts") || accept_ident("subsort")) {
        std::vector<std::string> subs;
        while (check(Token::Kind::ident)) subs.push_back(next().text);
        expect(Token::Kind::lt, "'<'");
        std::string super = expect_ident("supersort");
        expect(Token::Kind::dot, "'.'");
        for (const auto& s : subs) spec.sig.add_subsort(s, super);
        continue;
      }
      if (accept_ident("op") || accept_ident("ops")) {
        std::vector<std::string> names;
        while (check(Token::Kind::ident) || check(Token::Kind::semi)) {
          if (check(Token::Kind::semi)) {
            next();
            names.push_back(";");
          } else {
            names.push_back(next().text);
          }
        }
        if (names.empty())
          throw SyntaxError(line, col, "operator declaration without names");
        expect(Token::Kind::colon, "':'");
        std::vector<std::string> args;
        while (check(Token::Kind::ident)) args.push_back(next().text);
        expect(Token::Kind::arrow, "'->'");
        std::string result = expect_ident("result sort");
        expect(Token::Kind::dot, "'.'");
        for (const auto& n : names) spec.sig.add_op(n, args, result);
        continue;
      }
      if (accept_ident("var") || accept_ident("vars")) {
        std::vector<std::string> names;
        while (check(Token::Kind::ident)) names.push_back(next().text);
        expect(Token::Kind::colon, "':'");
        std::string sort = expect_ident("sort");
        expect(Token::Kind::dot, "'.'");
        for (const auto& n : names) {
          if (vars_.count(n))
            throw SyntaxError(line, col, "variable " + n + " redeclared");
          vars_[n] = sort;
          spec.var_decls.emplace_back(n, sort);
        }
        continue;
      }
      if (accept_ident("rule")) {
        pending_rules_.push_back({pos_, line, col});
        // Rules reference sorts and operators, so their terms are parsed
        // after the signature is finalized; skip to the closing dot.
        int depth = 0;
        while (!at_end()) {
          if (check(Token::Kind::lparen)) depth++;
          if (check(Token::Kind::rparen)) depth--;
          if (depth == 0 && check(Token::Kind::dot)) break;
          next();
        }
        expect(Token::Kind::dot, "'.'");
        continue;
      }
      throw SyntaxError(line, col, "unknown THEORY declaration '" + peek().text + "'");
    }
    // Second pass over the recorded rule positions.
    size_t save = pos_;
    for (const auto& pr : pending_rules_) {
      pos_ = pr.pos;
      Term lhs = parse_term(spec);
      expect(Token::Kind::arrow, "'->'");
      Term rhs = parse_term(spec);
      spec.theory.add_rule(lhs, rhs);
    }
    pos_ = save;
  }

  // ---- terms ----

  Term parse_term(LoadedSpec& spec) {
    Term lhs = parse_primary(spec);
    if (accept(Token::Kind::semi)) {
      Term rhs = parse_term(spec);
      if (!spec.sig.find_op(";"))
        throw SyntaxError(peek().line, peek().col,
                          "';' used but not declared as an operator");
      return build_app(spec, ";", {lhs, rhs});
    }
    return lhs;
  }

  Term parse_primary(LoadedSpec& spec) {
    if (accept(Token::Kind::lparen)) {
      Term t = parse_term(spec);
      expect(Token::Kind::rparen, "')'");
      return t;
    }
    int line = peek().line, col = peek().col;
    std::string name = expect_ident("a term");
    if (accept(Token::Kind::lparen)) {
      std::vector<Term> args;
      if (!check(Token::Kind::rparen)) {
        args.push_back(parse_term(spec));
        while (accept(Token::Kind::comma)) args.push_back(parse_term(spec));
      }
      expect(Token::Kind::rparen, "')'");
      return build_app(spec, name, std::move(args), line, col);
    }
    auto vit = vars_.find(name);
    if (vit != vars_.end()) return mk_var(name, spec.sig.sort(vit->second));
    if (spec.sig.find_op(name)) return build_app(spec, name, {}, line, col);
    throw SyntaxError(line, col, "unknown identifier '" + name + "'");
  }

  Term build_app(LoadedSpec& spec, const std::string& op, std::vector<Term> args,
                 int line = 0, int col = 0) {
    try {
      return mk_app(spec.sig, op, std::move(args));
    } catch (const Error& e) {
      throw SyntaxError(line ? line : peek().line, col ? col : peek().col, e.what());
    }
  }

  Constraint parse_cond(LoadedSpec& spec) {
    Term lhs = parse_term(spec);
    Constraint::Kind kind;
    if (accept_ident("eq"))
      kind = Constraint::Kind::eq;
    else if (accept_ident("neq"))
      kind = Constraint::Kind::neq;
    else
      throw SyntaxError(peek().line, peek().col, "expected 'eq' or 'neq'");
    Term rhs = parse_term(spec);
    return Constraint(kind, lhs, rhs);
  }

  // ---- PROCESSES ----

  void parse_processes(LoadedSpec& spec) {
    while (accept_ident("process")) {
      std::string role = expect_ident("role name");
      expect(Token::Kind::eq_sign, "'='");
      Process body = parse_proc(spec);
      spec.processes.add({role, 0, 0, body});
    }
  }

  Process parse_proc(LoadedSpec& spec) {
    std::vector<Action> acts = parse_atom(spec);
    while (accept(Token::Kind::dot)) {
      std::vector<Action> rest = parse_atom(spec);
      acts.insert(acts.end(), rest.begin(), rest.end());
    }
    return Process(std::move(acts));
  }

  std::vector<Action> parse_atom(LoadedSpec& spec) {
    if (accept_ident("nilP")) return {};
    if (accept(Token::Kind::plus)) {
      expect(Token::Kind::lparen, "'('");
      Term m = parse_term(spec);
      expect(Token::Kind::rparen, "')'");
      return {Action::send(m)};
    }
    if (accept(Token::Kind::minus)) {
      expect(Token::Kind::lparen, "'('");
      Term m = parse_term(spec);
      expect(Token::Kind::rparen, "')'");
      return {Action::recv(m)};
    }
    if (accept_ident("if")) {
      Constraint c = parse_cond(spec);
      if (!accept_ident("then"))
        throw SyntaxError(peek().line, peek().col, "expected 'then'");
      Process then_p(parse_atom(spec));
      if (!accept_ident("else"))
        throw SyntaxError(peek().line, peek().col, "expected 'else'");
      Process else_p(parse_atom(spec));
      return {Action::branch(c, then_p, else_p)};
    }
    if (accept(Token::Kind::lparen)) {
      Process left = parse_proc(spec);
      if (accept(Token::Kind::question)) {
        Process right = parse_proc(spec);
        expect(Token::Kind::rparen, "')'");
        return {Action::choice(left, right)};
      }
      expect(Token::Kind::rparen, "')'");
      return left.actions();
    }
    throw SyntaxError(peek().line, peek().col,
                      "expected a process action, got '" + peek().text + "'");
  }

  // ---- STRANDS ----

  void parse_strands(LoadedSpec& spec) {
    while (accept_ident("strand")) {
      LiteralStrand ls;
      ls.role = expect_ident("role name");
      expect(Token::Kind::eq_sign, "'='");
      ls.items = parse_items(spec);
      spec.literal_strands.push_back(std::move(ls));
    }
  }

  std::vector<StrandItem> parse_items(LoadedSpec& spec) {
    expect(Token::Kind::lbracket, "'['");
    std::vector<StrandItem> items;
    if (!check(Token::Kind::rbracket)) {
      items.push_back(parse_item(spec));
      while (accept(Token::Kind::comma)) items.push_back(parse_item(spec));
    }
    expect(Token::Kind::rbracket, "']'");
    return items;
  }

  StrandItem parse_item(LoadedSpec& spec) {
    if (accept(Token::Kind::plus)) {
      expect(Token::Kind::lparen, "'('");
      Term m = parse_term(spec);
      expect(Token::Kind::rparen, "')'");
      return StrandItem::send(m);
    }
    if (accept(Token::Kind::minus)) {
      expect(Token::Kind::lparen, "'('");
      Term m = parse_term(spec);
      expect(Token::Kind::rparen, "')'");
      return StrandItem::recv(m);
    }
    if (accept(Token::Kind::lbrace)) {
      if (accept(Token::Kind::question)) {
        expect(Token::Kind::comma, "','");
        int num = expect_number("branch number");
        expect(Token::Kind::rbrace, "'}'");
        return StrandItem::question(num);
      }
      Constraint c = parse_cond(spec);
      expect(Token::Kind::comma, "','");
      int num = expect_number("branch number");
      expect(Token::Kind::rbrace, "'}'");
      return StrandItem::constraint(c, num);
    }
    throw SyntaxError(peek().line, peek().col,
                      "expected a strand item, got '" + peek().text + "'");
  }

  // ---- DOMAINS ----

  void parse_domains(LoadedSpec& spec) {
    while (accept_ident("domain")) {
      std::string sort_name = expect_ident("sort name");
      SortId sort = spec.sig.sort(sort_name);
      expect(Token::Kind::eq_sign, "'='");
      expect(Token::Kind::lbrace, "'{'");
      std::vector<Term> vals;
      if (!check(Token::Kind::rbrace)) {
        vals.push_back(parse_term(spec));
        while (accept(Token::Kind::comma)) vals.push_back(parse_term(spec));
      }
      expect(Token::Kind::rbrace, "'}'");
      for (const auto& v : vals) {
        if (!is_ground(v))
          throw ResolutionError("domain value " + to_string(v) + " is not ground");
        if (!spec.sig.leq(sort_of(v), sort))
          throw ResolutionError("domain value " + to_string(v) + " does not have sort " +
                                sort_name);
      }
      spec.domain.values[sort] = std::move(vals);
    }
  }

  // ---- ATTACKS ----

  void parse_attacks(LoadedSpec& spec) {
    while (accept_ident("attack")) {
      AttackPattern a;
      a.id = expect_number("attack number");
      if (check(Token::Kind::str)) a.comment = next().text;
      expect(Token::Kind::lbrace, "'{'");
      while (!accept(Token::Kind::rbrace)) {
        if (accept_ident("strand")) {
          AttackStrand as;
          as.role = expect_ident("role name");
          as.items = parse_items(spec);
          a.strands.push_back(std::move(as));
          continue;
        }
        if (accept_ident("goal")) {
          a.goals.push_back(parse_term(spec));
          continue;
        }
        if (accept_ident("never")) {
          expect(Token::Kind::lbrace, "'{'");
          NeverConfig nc;
          while (accept_ident("strand")) {
            AttackStrand as;
            as.role = expect_ident("role name");
            as.items = parse_items(spec);
            nc.strands.push_back(std::move(as));
          }
          expect(Token::Kind::rbrace, "'}'");
          a.nevers.push_back(std::move(nc));
          continue;
        }
        throw SyntaxError(peek().line, peek().col,
                          "expected 'strand', 'goal' or 'never' in attack");
      }
      spec.attacks.push_back(std::move(a));
    }
  }

  struct PendingRule {
    size_t pos;
    int line, col;
  };

  std::vector<Token> ts_;
  size_t pos_ = 0;
  std::map<std::string, std::string> vars_;
  std::vector<PendingRule> pending_rules_;
};

// Classifies the variables of a literal strand by first occurrence.
std::map<std::string, VarKind> classify_strand_vars(const LiteralStrand& ls,
                                                    const Signature& sig) {
  std::map<std::string, VarKind> kinds;
  std::map<std::string, Term> all;
  for (const auto& it : ls.items) {
    std::map<std::string, Term> here;
    switch (it.kind) {
      case StrandItem::Kind::send:
      case StrandItem::Kind::recv:
        collect_var_terms(it.msg, here);
        break;
      case StrandItem::Kind::cstr:
        collect_var_terms(it.cstr.lhs, here);
        collect_var_terms(it.cstr.rhs, here);
        break;
      case StrandItem::Kind::question:
        break;
    }
    for (const auto& [n, v] : here) {
      all.emplace(n, v);
      if (kinds.count(n)) continue;
      if (v->sort == sig.fresh_sort()) {
        if (it.kind == StrandItem::Kind::recv)
          throw ResolutionError("KindConflict: sort-Fresh variable " + n + " of strand " +
                                ls.role + " first appears in a received message");
        kinds[n] = VarKind::fresh;
      } else if (it.kind == StrandItem::Kind::send) {
        kinds[n] = VarKind::choice;
      } else {
        kinds[n] = VarKind::pattern;
      }
    }
  }
  return kinds;
}

StrandItem annotate_item(const StrandItem& it, const std::map<std::string, VarKind>& kinds);

Term annotate_term_kinds(const Term& t, const std::map<std::string, VarKind>& kinds) {
  if (t->is_var()) {
    auto it = kinds.find(t->name);
    if (it == kinds.end() || it->second == t->kind) return t;
    return mk_var(t->name, t->sort, it->second);
  }
  if (t->is_fresh_name() || t->args.empty()) return t;
  std::vector<Term> args;
  args.reserve(t->args.size());
  for (const auto& a : t->args) args.push_back(annotate_term_kinds(a, kinds));
  return mk_app_raw(t->name, t->sort, std::move(args));
}

StrandItem annotate_item(const StrandItem& it, const std::map<std::string, VarKind>& kinds) {
  StrandItem out = it;
  switch (it.kind) {
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv:
      out.msg = annotate_term_kinds(it.msg, kinds);
      break;
    case StrandItem::Kind::cstr:
      out.cstr.lhs = annotate_term_kinds(it.cstr.lhs, kinds);
      out.cstr.rhs = annotate_term_kinds(it.cstr.rhs, kinds);
      break;
    case StrandItem::Kind::question:
      break;
  }
  return out;
}

}  // namespace

LoadedSpec parse_spec(const std::string& text) {
  Lexer lex(text);
  Parser parser(lex.run());
  LoadedSpec spec = parser.run();

  // Classify and annotate process variables.
  spec.classification = classify_variables(spec.processes, spec.sig);
  if (!spec.classification.ok) throw ResolutionError(spec.classification.diagnostic);
  spec.processes = annotate_kinds(spec.processes, spec.classification);

  // Classify literal strands and check they can enter the semantics.
  for (auto& ls : spec.literal_strands) {
    auto kinds = classify_strand_vars(ls, spec.sig);
    for (auto& it : ls.items) it = annotate_item(it, kinds);
    if (!ls.items.empty() && ls.items.front().kind == StrandItem::Kind::cstr)
      throw ResolutionError("strand " + ls.role +
                            " begins with a deterministic constraint; no semantics rule can "
                            "introduce it");
  }

  // Lift linear literal strands to processes so both semantics see them.
  std::vector<bool> lifted(spec.literal_strands.size(), false);
  for (size_t i = 0; i < spec.literal_strands.size(); ++i) {
    const LiteralStrand& ls = spec.literal_strands[i];
    bool linear = true;
    for (const auto& it : ls.items)
      if (it.kind == StrandItem::Kind::cstr || it.kind == StrandItem::Kind::question)
        linear = false;
    if (!linear) {
      spec.pa_runnable = false;
      spec.pa_block_reason = "strand " + ls.role +
                             " carries constraint items and exists only in strand form";
      continue;
    }
    if (spec.processes.find(ls.role, 0)) {
      spec.pa_runnable = false;
      spec.pa_block_reason = "role " + ls.role + " defined both as process and strand";
      continue;
    }
    std::vector<Action> acts;
    for (const auto& it : ls.items)
      acts.push_back(it.kind == StrandItem::Kind::send ? Action::send(it.msg)
                                                       : Action::recv(it.msg));
    spec.processes.add({ls.role, 0, 0, Process(std::move(acts))});
    lifted[i] = true;
  }

  // The strand view: translation of the processes plus literal strands kept
  // in strand form. Lifted strands translate back to themselves.
  ProcessConfiguration translatable;
  for (const auto& lp : spec.processes.processes()) translatable.add(lp);
  spec.strand_spec = to_cstr_ss(translatable, spec.sig);
  for (size_t i = 0; i < spec.literal_strands.size(); ++i) {
    const LiteralStrand& ls = spec.literal_strands[i];
    if (lifted[i]) continue;  // already present via the lifted process
    SpecStrand ss;
    ss.role = ls.role;
    ss.items = ls.items;
    std::map<std::string, Term> vt;
    for (const auto& it : ss.items) {
      if (it.kind == StrandItem::Kind::send || it.kind == StrandItem::Kind::recv)
        collect_var_terms(it.msg, vt);
      else if (it.kind == StrandItem::Kind::cstr) {
        collect_var_terms(it.cstr.lhs, vt);
        collect_var_terms(it.cstr.rhs, vt);
      }
    }
    for (const auto& [n, v] : vt)
      if (v->sort == spec.sig.fresh_sort()) ss.fresh_vars.push_back(v);
    spec.strand_spec.strands.push_back(std::move(ss));
  }
  return spec;
}

Protocol make_protocol(const LoadedSpec& spec, const MutationFlags& mutations) {
  Protocol p;
  p.sig = &spec.sig;
  p.theory = &spec.theory;
  p.processes = spec.processes;
  p.domain = spec.domain;
  p.mutations = mutations;
  if (mutations.drop_else_branch) {
    TranslateOptions topts;
    topts.drop_else_branch = true;
    p.strand_spec = to_cstr_ss(spec.processes, spec.sig, topts);
    for (const auto& ls : spec.literal_strands) {
      bool linear = true;
      for (const auto& it : ls.items)
        if (it.kind == StrandItem::Kind::cstr || it.kind == StrandItem::Kind::question)
          linear = false;
      if (linear) continue;
      SpecStrand ss;
      ss.role = ls.role;
      ss.items = ls.items;
      p.strand_spec.strands.push_back(std::move(ss));
    }
  } else {
    p.strand_spec = spec.strand_spec;
  }
  return p;
}

namespace {

std::string item_source(const StrandItem& it) {
  switch (it.kind) {
    case StrandItem::Kind::send: return "+(" + to_string(it.msg) + ")";
    case StrandItem::Kind::recv: return "-(" + to_string(it.msg) + ")";
    case StrandItem::Kind::cstr:
      return "{" + it.cstr.to_string() + ", " + std::to_string(it.num) + "}";
    case StrandItem::Kind::question:
      return "{?, " + std::to_string(it.num) + "}";
  }
  return "";
}

}  // namespace

std::string print_translated(const LoadedSpec& spec) {
  std::ostringstream os;
  os << "-- strand translation\n\nTHEORY\n";
  for (int s = 0; s < spec.sig.sort_count(); ++s) {
    const std::string& n = spec.sig.sort_name(s);
    if (n == "Msg" || n == "Fresh") continue;
    os << "  sorts " << n << " .\n";
  }
  for (int s = 0; s < spec.sig.sort_count(); ++s)
    for (int t = 0; t < spec.sig.sort_count(); ++t) {
      if (s == t || !spec.sig.leq(s, t)) continue;
      // Emit only the covering relations; transitive closure is recomputed.
      bool covered = false;
      for (int m = 0; m < spec.sig.sort_count(); ++m)
        if (m != s && m != t && spec.sig.leq(s, m) && spec.sig.leq(m, t)) covered = true;
      if (!covered)
        os << "  subsorts " << spec.sig.sort_name(s) << " < " << spec.sig.sort_name(t)
           << " .\n";
    }
  for (const auto& op : spec.sig.ops()) {
    os << "  op " << op.name << " :";
    for (SortId a : op.args) os << " " << spec.sig.sort_name(a);
    os << " -> " << spec.sig.sort_name(op.result) << " .\n";
  }
  for (const auto& [name, sort] : spec.var_decls)
    os << "  var " << name << " : " << sort << " .\n";
  for (const auto& r : spec.theory.rules())
    os << "  rule " << to_string(r.lhs) << " -> " << to_string(r.rhs) << " .\n";

  os << "\nSTRANDS\n";
  for (const auto& s : spec.strand_spec.strands) {
    os << "  strand " << s.role << " = [ ";
    for (size_t i = 0; i < s.items.size(); ++i) {
      if (i) os << ", ";
      os << item_source(s.items[i]);
    }
    os << " ]\n";
  }

  if (!spec.domain.values.empty()) {
    os << "\nDOMAINS\n";
    for (const auto& [sort, vals] : spec.domain.values) {
      os << "  domain " << spec.sig.sort_name(sort) << " = { ";
      for (size_t i = 0; i < vals.size(); ++i) {
        if (i) os << ", ";
        os << to_string(vals[i]);
      }
      os << " }\n";
    }
  }
  if (!spec.attacks.empty()) {
    os << "\nATTACKS\n";
    for (const auto& a : spec.attacks) {
      os << "  attack " << a.id;
      if (!a.comment.empty()) os << " \"" << a.comment << "\"";
      os << " {\n";
      for (const auto& as : a.strands) {
        os << "    strand " << as.role << " [ ";
        for (size_t i = 0; i < as.items.size(); ++i) {
          if (i) os << ", ";
          os << item_source(as.items[i]);
        }
        os << " ]\n";
      }
      for (const auto& g : a.goals) os << "    goal " << to_string(g) << "\n";
      for (const auto& nc : a.nevers) {
        os << "    never {\n";
        for (const auto& ns : nc.strands) {
          os << "      strand " << ns.role << " [ ";
          for (size_t i = 0; i < ns.items.size(); ++i) {
            if (i) os << ", ";
            os << item_source(ns.items[i]);
          }
          os << " ]\n";
        }
        os << "    }\n";
      }
      os << "  }\n";
    }
  }
  return os.str();
}

bool strand_specs_equal(const StrandSpec& a, const StrandSpec& b) {
  auto key = [](const SpecStrand& s) {
    std::map<std::string, int> ren;
    return s.role + " " + items_canonical(s.items, ren);
  };
  std::vector<std::string> ka, kb;
  for (const auto& s : a.strands) ka.push_back(key(s));
  for (const auto& s : b.strands) kb.push_back(key(s));
  std::sort(ka.begin(), ka.end());
  std::sort(kb.begin(), kb.end());
  return ka == kb;
}

}  // namespace strandweaver
