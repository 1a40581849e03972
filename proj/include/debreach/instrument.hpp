#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "taint.hpp"

namespace debreach {

// Data-dependence graph; an edge (s1, s2) means s1's value depends on s2.
class DDG {
 public:
  void add_node(StmtId s) { nodes_.insert(s); }

  void add_dep(StmtId dependent, StmtId dependee) {
    nodes_.insert(dependent);
    nodes_.insert(dependee);
    if (preds_[dependent].insert(dependee).second)
      succs_[dependee].insert(dependent);
  }

  bool has_node(StmtId s) const { return nodes_.contains(s); }
  const std::set<StmtId>& nodes() const { return nodes_; }

  // statements `s` depends on, ascending ID
  std::vector<StmtId> preds(StmtId s) const {
    auto it = preds_.find(s);
    if (it == preds_.end()) return {};
    return {it->second.begin(), it->second.end()};
  }

  std::vector<StmtId> succs(StmtId s) const {
    auto it = succs_.find(s);
    if (it == succs_.end()) return {};
    return {it->second.begin(), it->second.end()};
  }

 private:
  std::set<StmtId> nodes_;
  std::map<StmtId, std::set<StmtId>> preds_;
  std::map<StmtId, std::set<StmtId>> succs_;
};

inline DDG build_ddg(const std::set<std::pair<StmtId, StmtId>>& data_dep) {
  DDG g;
  for (const auto& [dependent, dependee] : data_dep)
    g.add_dep(dependent, dependee);
  return g;
}

// Whitelist results plus statement contexts (function / top-level script).
struct SafetyInfo {
  std::set<StmtId> unsafe_ops;          // fail the operation whitelist
  std::map<StmtId, std::string> context;

  std::string context_of(StmtId s) const {
    auto it = context.find(s);
    return it == context.end() ? std::string("0") : it->second;
  }
};

// Backward closure: a statement is unsafe if it is whitelist-unsafe or
// some whitelist-unsafe statement transitively depends on it.
inline std::set<StmtId> compute_unsafe_set(const DDG& ddg,
                                           const std::set<StmtId>& unsafe_ops) {
  std::set<StmtId> closed;
  std::vector<StmtId> work(unsafe_ops.begin(), unsafe_ops.end());
  while (!work.empty()) {
    StmtId s = work.back();
    work.pop_back();
    if (!closed.insert(s).second) continue;
    for (StmtId p : ddg.preds(s)) work.push_back(p);
  }
  return closed;
}

// Instrumentation points per tainted sink.
struct InstrPlan {
  std::map<StmtId, std::set<StmtId>> points;
};

namespace detail {

// Backward search from `cur` along dependence edges.  Stops at roots, at
// already-covered predecessors, at an unsafe predecessor, or when the
// recursion escaped the sink's context; the visited set is shared across
// the whole per-sink search.
inline std::vector<StmtId> find_instr(StmtId cur, std::set<StmtId>& visited,
                                      const std::string& ctx, const DDG& ddg,
                                      const std::set<StmtId>& unsafe,
                                      const SafetyInfo& safety) {
  std::vector<StmtId> preds = ddg.preds(cur);
  if (preds.empty()) return {cur};  // reached a taint source

  std::erase_if(preds, [&](StmtId p) { return visited.contains(p); });
  visited.insert(preds.begin(), preds.end());
  if (preds.empty()) return {};  // covered by another point

  for (StmtId p : preds)
    if (unsafe.contains(p)) return {cur};

  std::vector<StmtId> pts;
  for (StmtId p : preds) {
    auto sub = find_instr(p, visited, ctx, ddg, unsafe, safety);
    pts.insert(pts.end(), sub.begin(), sub.end());
  }
  for (StmtId pt : pts)
    if (safety.context_of(pt) != ctx) return {cur};  // keep annotations local
  return pts;
}

}  // namespace detail

inline InstrPlan find_instrumentation_points(
    const std::set<StmtId>& tainted_sinks, const DDG& ddg,
    const SafetyInfo& safety) {
  for (StmtId s : tainted_sinks)
    if (!ddg.has_node(s))
      throw std::invalid_argument("sink " + std::to_string(s) +
                                  " not in graph");

  std::set<StmtId> unsafe = compute_unsafe_set(ddg, safety.unsafe_ops);

  InstrPlan plan;
  for (StmtId sink : tainted_sinks) {
    std::set<StmtId> visited;
    auto pts = detail::find_instr(sink, visited, safety.context_of(sink), ddg,
                                  unsafe, safety);
    plan.points[sink] = {pts.begin(), pts.end()};
  }
  return plan;
}

// `Instrument sink stmt` lines, sorted.
inline std::string format_plan(const InstrPlan& plan) {
  std::ostringstream os;
  for (const auto& [sink, pts] : plan.points)
    for (StmtId p : pts) os << "Instrument " << sink << ' ' << p << '\n';
  return os.str();
}

}  // namespace debreach
