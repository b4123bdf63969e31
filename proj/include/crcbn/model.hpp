#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crcbn/error.hpp"

namespace crcbn {

using VarId = std::size_t;
using State = int;
inline constexpr State kUnset = -1;

struct Variable {
  std::string name;
  std::vector<std::string> states;
  /// Alternative spellings accepted on input (label -> canonical state).
  std::vector<std::pair<std::string, std::string>> aliases = {};

  std::size_t cardinality() const noexcept { return states.size(); }

  std::optional<State> state_index(std::string_view label) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == label) return static_cast<State>(i);
    for (const auto& [alias, canonical] : aliases)
      if (alias == label) return state_index(canonical);
    return std::nullopt;
  }
};

class NetworkSchema {
 public:
  NetworkSchema() = default;
  explicit NetworkSchema(std::vector<Variable> vars) : vars_(std::move(vars)) {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      const auto& v = vars_[i];
      require(!v.name.empty(), "variable name must be non-empty");
      require(v.cardinality() >= 2, "variable '" + v.name + "' needs at least two states");
      for (std::size_t a = 0; a < v.states.size(); ++a)
        for (std::size_t b = a + 1; b < v.states.size(); ++b)
          require(v.states[a] != v.states[b], "duplicate state '" + v.states[a] + "' in '" + v.name + "'");
      require(index_.emplace(v.name, i).second, "duplicate variable name '" + v.name + "'");
    }
  }

  std::size_t size() const noexcept { return vars_.size(); }
  const Variable& operator[](VarId i) const { return vars_.at(i); }
  const std::vector<Variable>& variables() const noexcept { return vars_; }
  std::size_t cardinality(VarId i) const { return vars_.at(i).cardinality(); }

  std::optional<VarId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  VarId index_of(std::string_view name) const {
    auto i = find(name);
    if (!i) fail(ErrorKind::contract, "unknown variable '" + std::string(name) + "'");
    return *i;
  }

  State state_of(VarId v, std::string_view label) const {
    auto s = vars_.at(v).state_index(label);
    if (!s) fail(ErrorKind::contract, "unknown state '" + std::string(label) + "' for '" + vars_[v].name + "'");
    return *s;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(vars_.size());
    for (const auto& v : vars_) out.push_back(v.name);
    return out;
  }

  /// Product of all cardinalities, saturating at uint64 max.
  std::uint64_t joint_state_count() const noexcept {
    std::uint64_t total = 1;
    for (const auto& v : vars_) {
      if (total > std::numeric_limits<std::uint64_t>::max() / v.cardinality())
        return std::numeric_limits<std::uint64_t>::max();
      total *= v.cardinality();
    }
    return total;
  }

  /// Same names and state lists in the same order (aliases are not compared).
  friend bool operator==(const NetworkSchema& a, const NetworkSchema& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a.vars_[i].name != b.vars_[i].name || a.vars_[i].states != b.vars_[i].states) return false;
    return true;
  }

 private:
  std::vector<Variable> vars_;
  std::unordered_map<std::string, VarId> index_;
};

struct Arc {
  VarId parent;
  VarId child;
  friend auto operator<=>(const Arc&, const Arc&) = default;
};

/// Directed graph over named nodes. Arcs index into `nodes`. Nothing here is
/// enforced at construction; validate_dag reports every violation.
struct Dag {
  std::vector<std::string> nodes;
  std::vector<Arc> arcs;

  static Dag empty(const NetworkSchema& schema) { return Dag{schema.names(), {}}; }

  /// Builds from name pairs against `schema`; unknown names are contract errors.
  static Dag from_names(const NetworkSchema& schema,
                        const std::vector<std::pair<std::string, std::string>>& named) {
    Dag d = empty(schema);
    for (const auto& [p, c] : named) d.arcs.push_back({schema.index_of(p), schema.index_of(c)});
    return d;
  }

  std::size_t size() const noexcept { return nodes.size(); }

  bool has_arc(VarId p, VarId c) const {
    return std::find(arcs.begin(), arcs.end(), Arc{p, c}) != arcs.end();
  }

  /// Parents of `v` in ascending index order.
  std::vector<VarId> parents(VarId v) const {
    std::vector<VarId> out;
    for (const auto& a : arcs)
      if (a.child == v) out.push_back(a.parent);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<VarId> children(VarId v) const {
    std::vector<VarId> out;
    for (const auto& a : arcs)
      if (a.parent == v) out.push_back(a.child);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<std::vector<VarId>> parent_sets() const {
    std::vector<std::vector<VarId>> ps(nodes.size());
    for (const auto& a : arcs)
      if (a.child < ps.size()) ps[a.child].push_back(a.parent);
    for (auto& p : ps) {
      std::sort(p.begin(), p.end());
      p.erase(std::unique(p.begin(), p.end()), p.end());
    }
    return ps;
  }

  /// Arcs in canonical (parent, child) order; used for equality checks.
  std::vector<Arc> sorted_arcs() const {
    auto a = arcs;
    std::sort(a.begin(), a.end());
    return a;
  }

  friend bool operator==(const Dag& a, const Dag& b) {
    return a.nodes == b.nodes && a.sorted_arcs() == b.sorted_arcs();
  }
};

struct DagViolation {
  enum class Kind { unknown_node, self_loop, duplicate_arc, cycle, bad_endpoint };
  Kind kind;
  std::string message;
  /// For cycles: the node names along the cycle, first node repeated at the end.
  std::vector<std::string> witness = {};
};

struct DagValidation {
  std::vector<DagViolation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

namespace detail {

/// Returns one directed cycle (as a node index path, closed) if any exists.
inline std::optional<std::vector<VarId>> find_cycle(std::size_t n, const std::vector<Arc>& arcs) {
  std::vector<std::vector<VarId>> out(n);
  for (const auto& a : arcs)
    if (a.parent < n && a.child < n) out[a.parent].push_back(a.child);
  for (auto& o : out) std::sort(o.begin(), o.end());
  enum : char { white, grey, black };
  std::vector<char> colour(n, white);
  std::vector<VarId> stack;
  std::optional<std::vector<VarId>> found;

  auto dfs = [&](auto&& self, VarId v) -> bool {
    colour[v] = grey;
    stack.push_back(v);
    for (VarId w : out[v]) {
      if (colour[w] == grey) {
        auto it = std::find(stack.begin(), stack.end(), w);
        std::vector<VarId> cyc(it, stack.end());
        cyc.push_back(w);
        found = std::move(cyc);
        return true;
      }
      if (colour[w] == white && self(self, w)) return true;
    }
    stack.pop_back();
    colour[v] = black;
    return false;
  };
  for (VarId v = 0; v < n && !found; ++v)
    if (colour[v] == white) dfs(dfs, v);
  return found;
}

}  // namespace detail

inline DagValidation validate_dag(const Dag& dag, const NetworkSchema& schema) {
  DagValidation r;
  using K = DagViolation::Kind;
  for (const auto& name : dag.nodes)
    if (!schema.find(name)) r.violations.push_back({K::unknown_node, "unknown node " + name});
  for (std::size_t i = 0; i < dag.nodes.size(); ++i)
    for (std::size_t j = i + 1; j < dag.nodes.size(); ++j)
      if (dag.nodes[i] == dag.nodes[j])
        r.violations.push_back({K::unknown_node, "node listed twice: " + dag.nodes[i]});

  const std::size_t n = dag.nodes.size();
  auto label = [&](VarId v) { return v < n ? dag.nodes[v] : "#" + std::to_string(v); };
  std::vector<Arc> seen;
  for (const auto& a : dag.arcs) {
    if (a.parent >= n || a.child >= n) {
      r.violations.push_back({K::bad_endpoint, "arc endpoint out of range: " + label(a.parent) + "->" + label(a.child)});
      continue;
    }
    if (a.parent == a.child) r.violations.push_back({K::self_loop, "self-loop on " + label(a.parent)});
    if (std::find(seen.begin(), seen.end(), a) != seen.end())
      r.violations.push_back({K::duplicate_arc, "duplicate arc " + label(a.parent) + "->" + label(a.child)});
    seen.push_back(a);
  }
  std::vector<Arc> proper;
  for (const auto& a : seen)
    if (a.parent != a.child) proper.push_back(a);
  if (auto cyc = detail::find_cycle(n, proper)) {
    DagViolation v{K::cycle, "cycle ", {}};
    for (std::size_t i = 0; i < cyc->size(); ++i) {
      v.witness.push_back(label((*cyc)[i]));
      v.message += (i ? "->" : "") + label((*cyc)[i]);
    }
    r.violations.push_back(std::move(v));
  }
  return r;
}

/// Kahn's algorithm, always releasing the lowest ready index first.
inline std::vector<VarId> topological_order(const Dag& dag) {
  const std::size_t n = dag.size();
  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::vector<VarId>> out(n);
  for (const auto& a : dag.arcs) {
    out[a.parent].push_back(a.child);
    ++indeg[a.child];
  }
  std::vector<VarId> ready, order;
  for (VarId v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push_back(v);
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end());
    VarId v = *it;
    ready.erase(it);
    order.push_back(v);
    for (VarId w : out[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  require(order.size() == n, "graph is not acyclic");
  return order;
}

struct ArcConstraints {
  std::vector<Arc> required;
  std::vector<Arc> forbidden;

  bool is_required(Arc a) const { return std::find(required.begin(), required.end(), a) != required.end(); }
  bool is_forbidden(Arc a) const { return std::find(forbidden.begin(), forbidden.end(), a) != forbidden.end(); }
};

/// Empty when the constraints are consistent on an `n`-node graph.
inline std::vector<std::string> validate_constraints(const ArcConstraints& c, std::size_t n) {
  std::vector<std::string> out;
  for (const auto& a : c.required) {
    if (a.parent >= n || a.child >= n) out.push_back("required arc out of range");
    else if (a.parent == a.child) out.push_back("required self-loop");
    if (c.is_forbidden(a)) out.push_back("arc both required and forbidden");
  }
  for (const auto& a : c.forbidden)
    if (a.parent >= n || a.child >= n) out.push_back("forbidden arc out of range");
  if (out.empty() && detail::find_cycle(n, c.required)) out.push_back("required arcs contain a cycle");
  return out;
}

/// Partial map variable -> state, dense over the schema (kUnset = absent).
class Evidence {
 public:
  Evidence() = default;
  explicit Evidence(std::size_t n) : states_(n, kUnset) {}
  Evidence(std::vector<State> states) : states_(std::move(states)) {}

  std::size_t size() const noexcept { return states_.size(); }
  bool is_set(VarId v) const { return states_.at(v) != kUnset; }
  State operator[](VarId v) const { return states_.at(v); }
  void set(VarId v, State s) { states_.at(v) = s; }
  void unset(VarId v) { states_.at(v) = kUnset; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count_if(states_.begin(), states_.end(), [](State s) { return s != kUnset; }));
  }
  bool empty() const noexcept { return count() == 0; }
  bool is_total() const noexcept { return count() == states_.size(); }

  std::vector<VarId> variables() const {
    std::vector<VarId> out;
    for (VarId v = 0; v < states_.size(); ++v)
      if (states_[v] != kUnset) out.push_back(v);
    return out;
  }

  std::span<const State> states() const noexcept { return states_; }

  friend bool operator==(const Evidence&, const Evidence&) = default;

 private:
  std::vector<State> states_;
};

using Assignment = Evidence;

inline void check_evidence(const Evidence& e, const NetworkSchema& schema) {
  require(e.size() == schema.size(), "evidence size does not match schema");
  for (VarId v = 0; v < e.size(); ++v)
    require(e[v] == kUnset || (e[v] >= 0 && static_cast<std::size_t>(e[v]) < schema.cardinality(v)),
            "state index out of range for '" + schema[v].name + "'");
}

/// Parses "name=state" items against the schema.
inline Evidence parse_evidence(const NetworkSchema& schema, const std::vector<std::string>& items) {
  Evidence e(schema.size());
  for (const auto& item : items) {
    auto eq = item.find('=');
    require(eq != std::string::npos, "expected name=state, got '" + item + "'");
    VarId v = schema.index_of(item.substr(0, eq));
    require(!e.is_set(v), "variable '" + schema[v].name + "' given twice");
    e.set(v, schema.state_of(v, item.substr(eq + 1)));
  }
  return e;
}

/// Conditional probability table. Rows are parent configurations in
/// lexicographic order over parent state indices, first parent most
/// significant; each row is a distribution over the node's states.
class Cpt {
 public:
  Cpt() = default;
  Cpt(VarId node, std::size_t k, std::vector<VarId> parents, std::vector<std::size_t> parent_cards,
      std::vector<double> table)
      : node_(node), k_(k), parents_(std::move(parents)), parent_cards_(std::move(parent_cards)),
        table_(std::move(table)) {
    require(parents_.size() == parent_cards_.size(), "parent cardinalities do not match parents");
    require(table_.size() == rows() * k_, "CPT table has wrong size");
    for (std::size_t u = 0; u < rows(); ++u) {
      double s = 0.0;
      for (double p : row(u)) {
        require(p >= 0.0 && std::isfinite(p), "CPT entries must be finite and nonnegative");
        s += p;
      }
      require(std::abs(s - 1.0) <= 1e-12, "CPT row does not sum to 1");
    }
  }

  VarId node() const noexcept { return node_; }
  std::size_t cardinality() const noexcept { return k_; }
  const std::vector<VarId>& parents() const noexcept { return parents_; }
  const std::vector<std::size_t>& parent_cardinalities() const noexcept { return parent_cards_; }

  std::size_t rows() const noexcept {
    std::size_t r = 1;
    for (auto c : parent_cards_) r *= c;
    return r;
  }

  std::span<const double> row(std::size_t u) const { return {table_.data() + u * k_, k_}; }
  double prob(std::size_t u, State x) const { return table_[u * k_ + static_cast<std::size_t>(x)]; }
  const std::vector<double>& table() const noexcept { return table_; }

  /// Row index for the parent states found in `e` (all parents must be set).
  std::size_t config_index(std::span<const State> states) const {
    std::size_t u = 0;
    for (std::size_t i = 0; i < parents_.size(); ++i) u = u * parent_cards_[i] + static_cast<std::size_t>(states[parents_[i]]);
    return u;
  }

  /// Inverse of config_index: parent states for row `u`.
  std::vector<State> config_states(std::size_t u) const {
    std::vector<State> s(parents_.size());
    for (std::size_t i = parents_.size(); i-- > 0;) {
      s[i] = static_cast<State>(u % parent_cards_[i]);
      u /= parent_cards_[i];
    }
    return s;
  }

 private:
  VarId node_ = 0;
  std::size_t k_ = 0;
  std::vector<VarId> parents_;
  std::vector<std::size_t> parent_cards_;
  std::vector<double> table_;
};

/// Number of parent configurations of `v` in `dag`.
inline std::size_t config_count(const NetworkSchema& schema, const std::vector<VarId>& parents) {
  std::size_t q = 1;
  for (VarId p : parents) q *= schema.cardinality(p);
  return q;
}

struct Structure {
  NetworkSchema schema;
  Dag dag;
};

inline void check_structure(const NetworkSchema& schema, const Dag& dag) {
  require(dag.nodes == schema.names(), "DAG nodes must list the schema variables in schema order");
  auto v = validate_dag(dag, schema);
  if (!v.ok()) fail(ErrorKind::contract, "invalid DAG: " + v.violations.front().message);
}

class BayesianNetwork {
 public:
  BayesianNetwork() = default;
  BayesianNetwork(NetworkSchema schema, Dag dag, std::vector<Cpt> cpts)
      : schema_(std::move(schema)), dag_(std::move(dag)), cpts_(std::move(cpts)) {
    check_structure(schema_, dag_);
    require(cpts_.size() == schema_.size(), "need exactly one CPT per node");
    auto ps = dag_.parent_sets();
    for (VarId v = 0; v < cpts_.size(); ++v) {
      const auto& c = cpts_[v];
      require(c.node() == v, "CPTs must be ordered by node");
      require(c.parents() == ps[v], "CPT parents of '" + schema_[v].name + "' do not match the DAG");
      require(c.cardinality() == schema_.cardinality(v), "CPT cardinality mismatch");
      for (std::size_t i = 0; i < ps[v].size(); ++i)
        require(c.parent_cardinalities()[i] == schema_.cardinality(ps[v][i]), "CPT parent cardinality mismatch");
    }
    order_ = topological_order(dag_);
  }

  const NetworkSchema& schema() const noexcept { return schema_; }
  const Dag& dag() const noexcept { return dag_; }
  const Cpt& cpt(VarId v) const { return cpts_.at(v); }
  const std::vector<Cpt>& cpts() const noexcept { return cpts_; }
  std::size_t size() const noexcept { return schema_.size(); }
  const std::vector<VarId>& topological() const noexcept { return order_; }

 private:
  NetworkSchema schema_;
  Dag dag_;
  std::vector<Cpt> cpts_;
  std::vector<VarId> order_;
};

/// Builds a network from per-node flat tables (rows in config order).
inline BayesianNetwork make_network(const NetworkSchema& schema, const Dag& dag,
                                    const std::vector<std::vector<double>>& tables) {
  require(tables.size() == schema.size(), "need one table per node");
  auto ps = dag.parent_sets();
  std::vector<Cpt> cpts;
  cpts.reserve(schema.size());
  for (VarId v = 0; v < schema.size(); ++v) {
    std::vector<std::size_t> cards;
    for (VarId p : ps[v]) cards.push_back(schema.cardinality(p));
    cpts.emplace_back(v, schema.cardinality(v), ps[v], std::move(cards), tables[v]);
  }
  return BayesianNetwork(schema, dag, std::move(cpts));
}

inline double log_joint_probability(const BayesianNetwork& net, const Assignment& a) {
  require(a.size() == net.size() && a.is_total(), "joint_probability needs a total assignment");
  check_evidence(a, net.schema());
  double lp = 0.0;
  for (const auto& c : net.cpts()) {
    double p = c.prob(c.config_index(a.states()), a[c.node()]);
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    lp += std::log(p);
  }
  return lp;
}

inline double joint_probability(const BayesianNetwork& net, const Assignment& a) {
  return std::exp(log_joint_probability(net, a));
}

/// The 14-variable colorectal-cancer network: variable coding and parent sets.
inline Structure reference_crc_network() {
  const std::vector<std::string> yes_no{"yes", "no"};
  NetworkSchema schema({
      {"v_sex", {"female", "male"}, {{"woman", "female"}, {"man", "male"}}},
      {"v_age", {"(24,34]", "(34,44]", "(44,54]", "(54,64]"}},
      {"v_SES", {"1", "2", "3"}},
      {"v_BMI", {"underweight", "normal", "overweight", "obese"}, {{"underw.", "underweight"}, {"overw.", "overweight"}}},
      {"v_PA", {"insufficiently active", "sufficiently active"}, {{"1", "insufficiently active"}, {"2", "sufficiently active"}}},
      {"v_SD", {"short", "normal", "excessive"}},
      {"v_alc", {"low", "high"}},
      {"v_smok", {"non-smoker", "ex-smoker", "smoker"}},
      {"v_anx", yes_no},
      {"v_dep", yes_no},
      {"v_hypten", yes_no},
      {"v_hypchol", yes_no},
      {"v_diab", yes_no},
      {"v_CRC", yes_no},
  });
  const std::vector<std::pair<std::string, std::vector<std::string>>> families{
      {"v_SES", {"v_sex", "v_age"}},
      {"v_SD", {"v_sex", "v_age"}},
      {"v_PA", {"v_sex", "v_age", "v_SD", "v_SES"}},
      {"v_dep", {"v_sex", "v_age", "v_SES"}},
      {"v_smok", {"v_sex", "v_age", "v_PA"}},
      {"v_alc", {"v_sex", "v_age", "v_smok"}},
      {"v_BMI", {"v_sex", "v_age", "v_PA", "v_smok"}},
      {"v_anx", {"v_sex", "v_SD", "v_smok", "v_dep"}},
      {"v_hypchol", {"v_sex", "v_age", "v_PA", "v_smok", "v_BMI", "v_alc"}},
      {"v_diab", {"v_sex", "v_age", "v_PA", "v_BMI"}},
      {"v_hypten", {"v_age", "v_PA", "v_smok", "v_BMI", "v_alc", "v_diab"}},
      {"v_CRC", {"v_sex", "v_age", "v_alc", "v_smok", "v_hypchol", "v_hypten", "v_diab"}},
  };
  std::vector<std::pair<std::string, std::string>> named;
  for (const auto& [child, parents] : families)
    for (const auto& p : parents) named.emplace_back(p, child);
  Dag dag = Dag::from_names(schema, named);
  return {std::move(schema), std::move(dag)};
}

}  // namespace crcbn
