#pragma once

#include <charconv>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace debreach {

using StmtId = std::uint32_t;

// Extensional relations over statement IDs, variable names and field
// names, one tuple per input line.  UnsafeOp/Context feed the
// instrumentation planner and are carried through untouched.
struct FactBase {
  std::set<std::pair<StmtId, StmtId>> edge;       // Edge s1 s2: flow s1 -> s2
  std::set<StmtId> unsafe_branch;
  std::set<std::pair<StmtId, StmtId>> ctrl_dep;   // CtrlDep s1 s2: s1 on s2
  std::set<std::pair<std::string, StmtId>> store_var;
  std::set<std::pair<std::string, StmtId>> store_field;
  std::set<std::pair<std::string, StmtId>> load_var;
  std::set<std::pair<std::string, StmtId>> load_field;
  std::set<StmtId> source;
  std::set<StmtId> sink;
  std::set<StmtId> declared;  // Stmt facts

  std::set<StmtId> unsafe_op;                     // instrumentation inputs
  std::map<StmtId, std::string> context;

  // pre-parsed derived tuples, when the file carries solver output
  std::set<std::pair<StmtId, StmtId>> data_dep;   // (load stmt, def stmt)
  std::set<StmtId> tainted_sink;
};

// (variable-or-field, defining statement, statement it still reaches)
using TaintedFrom = std::set<std::tuple<std::string, StmtId, StmtId>>;

struct DerivedRelations {
  TaintedFrom tainted_var_from;
  TaintedFrom tainted_field_from;
  std::set<StmtId> tainted;
  std::set<std::pair<StmtId, StmtId>> data_dep;  // (load stmt, def stmt)
  std::set<StmtId> tainted_sink;
};

// ---------------------------------------------------------------------
// Facts file format: one `Relation arg...` tuple per line, `#` comments.
// ---------------------------------------------------------------------

namespace detail {

inline StmtId parse_stmt_id(std::string_view tok, std::size_t line) {
  StmtId value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw facts_parse_error("non-integer statement ID '" + std::string(tok) +
                                "'",
                            line);
  return value;
}

}  // namespace detail

inline FactBase parse_facts(std::string_view text) {
  FactBase fb;
  std::vector<std::pair<StmtId, std::size_t>> mentioned;  // id, line

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);

    std::vector<std::string_view> tok;
    std::size_t t = 0;
    while (t < line.size()) {
      while (t < line.size() && (line[t] == ' ' || line[t] == '\t' ||
                                 line[t] == '\r'))
        ++t;
      std::size_t start = t;
      while (t < line.size() && line[t] != ' ' && line[t] != '\t' &&
             line[t] != '\r')
        ++t;
      if (t > start) tok.push_back(line.substr(start, t - start));
    }
    if (tok.empty()) continue;

    auto want = [&](std::size_t arity) {
      if (tok.size() != arity + 1)
        throw facts_parse_error(
            std::string(tok[0]) + " expects " + std::to_string(arity) +
                " arguments, got " + std::to_string(tok.size() - 1),
            line_no);
    };
    // IDs in the core relations must be declared (Edge endpoint or Stmt);
    // derived relations and instrumentation inputs are exempt
    auto sid = [&](std::size_t k) {
      StmtId id = detail::parse_stmt_id(tok[k], line_no);
      mentioned.emplace_back(id, line_no);
      return id;
    };
    auto raw_sid = [&](std::size_t k) {
      return detail::parse_stmt_id(tok[k], line_no);
    };
    auto name = [&](std::size_t k) { return std::string(tok[k]); };

    std::string_view rel = tok[0];
    if (rel == "Stmt") {
      want(1);
      fb.declared.insert(detail::parse_stmt_id(tok[1], line_no));
    } else if (rel == "Edge") {
      want(2);
      StmtId a = detail::parse_stmt_id(tok[1], line_no);
      StmtId b = detail::parse_stmt_id(tok[2], line_no);
      fb.edge.emplace(a, b);
    } else if (rel == "UnsafeBranch") {
      want(1);
      fb.unsafe_branch.insert(sid(1));
    } else if (rel == "CtrlDep") {
      want(2);
      fb.ctrl_dep.emplace(sid(1), sid(2));
    } else if (rel == "StoreVar") {
      want(2);
      fb.store_var.emplace(name(1), sid(2));
    } else if (rel == "StoreField") {
      want(2);
      fb.store_field.emplace(name(1), sid(2));
    } else if (rel == "LoadVar") {
      want(2);
      fb.load_var.emplace(name(1), sid(2));
    } else if (rel == "LoadField") {
      want(2);
      fb.load_field.emplace(name(1), sid(2));
    } else if (rel == "Source") {
      want(1);
      fb.source.insert(sid(1));
    } else if (rel == "Sink") {
      want(1);
      fb.sink.insert(sid(1));
    } else if (rel == "UnsafeOp") {
      want(1);
      fb.unsafe_op.insert(raw_sid(1));
    } else if (rel == "Context") {
      want(2);
      fb.context[raw_sid(1)] = name(2);
    } else if (rel == "DataDep") {
      want(2);
      fb.data_dep.emplace(raw_sid(1), raw_sid(2));
    } else if (rel == "TaintedSink") {
      want(1);
      fb.tainted_sink.insert(raw_sid(1));
    } else if (rel == "Tainted" || rel == "TaintedVarFrom" ||
               rel == "TaintedFieldFrom") {
      // solver output re-read for inspection; tuples are not re-derived
      if (rel == "Tainted") want(1); else want(3);
      if (rel == "Tainted") raw_sid(1);
      else { name(1); raw_sid(2); raw_sid(3); }
    } else {
      throw facts_parse_error("unknown relation '" + std::string(rel) + "'",
                              line_no);
    }
  }

  std::set<StmtId> known = fb.declared;
  for (const auto& [a, b] : fb.edge) {
    known.insert(a);
    known.insert(b);
  }
  for (const auto& [id, ln] : mentioned)
    if (!known.contains(id))
      throw facts_parse_error("statement " + std::to_string(id) +
                                  " appears in no Edge and has no Stmt fact",
                              ln);
  return fb;
}

// ---------------------------------------------------------------------
// Semi-naive fixpoint over the dependency rules.  The only negation reads
// the extensional StoreVar relation, so evaluation is stratified and the
// least fixpoint unique.  The kill on variable propagation exempts the
// defining statement: the definition is generated on exit of its own
// store.  Field propagation has no kill (field-based heap abstraction).
// ---------------------------------------------------------------------

inline DerivedRelations solve_taint(const FactBase& fb) {
  DerivedRelations out;

  // extensional indexes
  std::map<StmtId, std::vector<StmtId>> succs;
  for (const auto& [a, b] : fb.edge) succs[a].push_back(b);
  std::map<StmtId, std::vector<std::string>> var_stores_at;
  for (const auto& [v, s] : fb.store_var) var_stores_at[s].push_back(v);
  std::map<StmtId, std::vector<std::string>> field_stores_at;
  for (const auto& [f, s] : fb.store_field) field_stores_at[s].push_back(f);
  std::map<StmtId, std::vector<StmtId>> ctrl_dependents;  // branch -> stmts
  for (const auto& [s, br] : fb.ctrl_dep) ctrl_dependents[br].push_back(s);

  struct VarTuple {
    std::string name;
    StmtId def;
    StmtId at;
    bool field;
  };
  std::deque<VarTuple> var_work;
  std::deque<StmtId> tainted_work;

  auto add_from = [&](std::string name, StmtId def, StmtId at, bool field) {
    auto& rel = field ? out.tainted_field_from : out.tainted_var_from;
    if (rel.emplace(name, def, at).second)
      var_work.push_back(VarTuple{std::move(name), def, at, field});
  };
  auto add_tainted = [&](StmtId s) {
    if (out.tainted.insert(s).second) tainted_work.push_back(s);
  };

  // seed: variables and fields stored at sources
  for (StmtId s : fb.source) {
    if (auto it = var_stores_at.find(s); it != var_stores_at.end())
      for (const auto& v : it->second) add_from(v, s, s, false);
    if (auto it = field_stores_at.find(s); it != field_stores_at.end())
      for (const auto& f : it->second) add_from(f, s, s, true);
  }

  while (!var_work.empty() || !tainted_work.empty()) {
    if (!var_work.empty()) {
      VarTuple t = std::move(var_work.front());
      var_work.pop_front();

      const auto& loads = t.field ? fb.load_field : fb.load_var;
      if (loads.contains({t.name, t.at})) {
        add_tainted(t.at);
        out.data_dep.emplace(t.at, t.def);
        if (fb.unsafe_branch.contains(t.at))  // implicit flow
          if (auto it = ctrl_dependents.find(t.at); it != ctrl_dependents.end())
            for (StmtId dep : it->second) add_tainted(dep);
      }

      // propagate along control flow; a re-store of the same variable at a
      // later statement kills the definition
      bool killed = !t.field && t.at != t.def &&
                    fb.store_var.contains({t.name, t.at});
      if (!killed)
        if (auto it = succs.find(t.at); it != succs.end())
          for (StmtId nxt : it->second) add_from(t.name, t.def, nxt, t.field);
      continue;
    }

    StmtId s = tainted_work.front();
    tainted_work.pop_front();
    if (fb.sink.contains(s)) out.tainted_sink.insert(s);
    if (auto it = var_stores_at.find(s); it != var_stores_at.end())
      for (const auto& v : it->second) add_from(v, s, s, false);
    if (auto it = field_stores_at.find(s); it != field_stores_at.end())
      for (const auto& f : it->second) add_from(f, s, s, true);
  }

  return out;
}

// Deterministic text form: relations lexicographically, tuples in set
// order (names lexicographic, IDs numeric).
inline std::string format_derived(const DerivedRelations& d) {
  std::ostringstream os;
  for (const auto& [a, b] : d.data_dep) os << "DataDep " << a << ' ' << b << '\n';
  for (StmtId s : d.tainted) os << "Tainted " << s << '\n';
  for (const auto& [f, def, at] : d.tainted_field_from)
    os << "TaintedFieldFrom " << f << ' ' << def << ' ' << at << '\n';
  for (StmtId s : d.tainted_sink) os << "TaintedSink " << s << '\n';
  for (const auto& [v, def, at] : d.tainted_var_from)
    os << "TaintedVarFrom " << v << ' ' << def << ' ' << at << '\n';
  return os.str();
}

// ---------------------------------------------------------------------
// Branch predicate classification.  A branch is safe when every atom of
// its predicate is a bare variable, a comparison against a hard-coded
// value, a comparison against a variable's length, or a type check;
// comparing against anything dynamic makes it unsafe.
// ---------------------------------------------------------------------

struct PredicateAst;
using PredicatePtr = std::shared_ptr<const PredicateAst>;

struct PredicateAst {
  enum class Kind {
    bare_var,         // if ($var)
    cmp_var_const,    // $var == "literal"
    cmp_len_const,    // strlen($var) > 20
    type_check,       // is_string($var)
    cmp_var_dynamic,  // $var == <dynamically computed expression>
    logic_and,
    logic_or,
    logic_not,
  };

  Kind kind;
  std::string variable;              // atoms only
  std::vector<PredicatePtr> children;  // connectives only

  static PredicatePtr bare_var(std::string v) {
    return atom(Kind::bare_var, std::move(v));
  }
  static PredicatePtr cmp_var_const(std::string v) {
    return atom(Kind::cmp_var_const, std::move(v));
  }
  static PredicatePtr cmp_len_const(std::string v) {
    return atom(Kind::cmp_len_const, std::move(v));
  }
  static PredicatePtr type_check(std::string v) {
    return atom(Kind::type_check, std::move(v));
  }
  static PredicatePtr cmp_var_dynamic(std::string v) {
    return atom(Kind::cmp_var_dynamic, std::move(v));
  }
  static PredicatePtr land(std::vector<PredicatePtr> cs) {
    return node(Kind::logic_and, std::move(cs));
  }
  static PredicatePtr lor(std::vector<PredicatePtr> cs) {
    return node(Kind::logic_or, std::move(cs));
  }
  static PredicatePtr lnot(PredicatePtr c) {
    return node(Kind::logic_not, {std::move(c)});
  }

 private:
  static PredicatePtr atom(Kind k, std::string v) {
    auto p = std::make_shared<PredicateAst>();
    p->kind = k;
    p->variable = std::move(v);
    return p;
  }
  static PredicatePtr node(Kind k, std::vector<PredicatePtr> cs) {
    auto p = std::make_shared<PredicateAst>();
    p->kind = k;
    p->children = std::move(cs);
    return p;
  }
};

enum class BranchSafety { safe, unsafe };

inline BranchSafety classify_branch(const PredicateAst& p) {
  using Kind = PredicateAst::Kind;
  switch (p.kind) {
    case Kind::bare_var:
    case Kind::cmp_var_const:
    case Kind::cmp_len_const:
    case Kind::type_check:
      return BranchSafety::safe;
    case Kind::cmp_var_dynamic:
      return BranchSafety::unsafe;
    default:
      for (const auto& c : p.children)
        if (classify_branch(*c) == BranchSafety::unsafe)
          return BranchSafety::unsafe;
      return BranchSafety::safe;
  }
}

}  // namespace debreach
