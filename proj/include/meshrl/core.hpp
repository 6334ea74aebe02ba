#ifndef MESHRL_CORE_HPP_
#define MESHRL_CORE_HPP_

// Domain types shared by every stage of the pipeline: the service mesh,
// control actions and their discretization grid, observations and traces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace meshrl {

// Out-of-range argument to a pure domain function (e.g. b outside [0,1]).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Malformed or inconsistent input data: traces, configs, model files.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite losses, degenerate statistics and similar numeric breakdowns.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ServiceKind { information, compute };
enum class NodeRole { front, backend };

inline const char* to_string(ServiceKind k) {
  return k == ServiceKind::information ? "information" : "compute";
}

struct Node {
  int id = 0;
  NodeRole role = NodeRole::backend;
};

using Path = std::vector<int>;

struct ServiceSpec {
  int id = 0;  // label used in reports (1, 2, 3 in the shipped mesh)
  ServiceKind kind = ServiceKind::information;
  double delay_bound = 0.1;  // seconds
  std::vector<Path> paths;   // first entry is the path weighted by p
};

// Directed service graph. Node ids are dense: node k has id k.
class MeshTopology {
 public:
  MeshTopology() = default;

  MeshTopology(std::vector<Node> nodes, std::vector<std::pair<int, int>> edges,
               std::vector<ServiceSpec> services, std::vector<int> scalable)
      : nodes_(std::move(nodes)),
        edges_(std::move(edges)),
        services_(std::move(services)),
        scalable_(std::move(scalable)) {
    validate();
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<ServiceSpec>& services() const { return services_; }
  const std::vector<int>& scalable_nodes() const { return scalable_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t service_count() const { return services_.size(); }
  std::size_t scalable_count() const { return scalable_.size(); }

  int front_node() const {
    for (const auto& n : nodes_)
      if (n.role == NodeRole::front) return n.id;
    return -1;
  }

  bool has_edge(int from, int to) const {
    return std::find(edges_.begin(), edges_.end(), std::make_pair(from, to)) !=
           edges_.end();
  }

  // Position of `node` in scalable_nodes(), or -1.
  int scalable_index(int node) const {
    auto it = std::find(scalable_.begin(), scalable_.end(), node);
    return it == scalable_.end() ? -1 : static_cast<int>(it - scalable_.begin());
  }

  bool on_any_path(std::size_t service, int node) const {
    for (const auto& path : services_.at(service).paths)
      if (std::find(path.begin(), path.end(), node) != path.end()) return true;
    return false;
  }

 private:
  void validate() const {
    const int n = static_cast<int>(nodes_.size());
    if (n == 0) throw ValidationError("topology has no nodes");
    int fronts = 0;
    for (int k = 0; k < n; ++k) {
      if (nodes_[k].id != k) throw ValidationError("node ids must be dense 0..n-1");
      if (nodes_[k].role == NodeRole::front) ++fronts;
    }
    if (fronts != 1) throw ValidationError("topology needs exactly one front node");
    for (auto [a, b] : edges_)
      if (a < 0 || b < 0 || a >= n || b >= n || a == b)
        throw ValidationError("edge references unknown node");

    // Acyclic and rooted at the front node: Kahn's algorithm plus reachability.
    std::vector<int> indegree(n, 0);
    for (auto [a, b] : edges_) ++indegree[b];
    const int front = front_node();
    if (indegree[front] != 0) throw ValidationError("front node has incoming edges");
    std::vector<int> queue;
    for (int k = 0; k < n; ++k)
      if (indegree[k] == 0) queue.push_back(k);
    std::size_t head = 0;
    while (head < queue.size()) {
      int u = queue[head++];
      for (auto [a, b] : edges_)
        if (a == u && --indegree[b] == 0) queue.push_back(b);
    }
    if (static_cast<int>(queue.size()) != n) throw ValidationError("topology has a cycle");
    std::vector<char> reach(n, 0);
    reach[front] = 1;
    for (int u : queue)
      if (reach[u])
        for (auto [a, b] : edges_)
          if (a == u) reach[b] = 1;
    for (int k = 0; k < n; ++k)
      if (!reach[k]) throw ValidationError("node not reachable from front node");

    if (services_.empty()) throw ValidationError("topology has no services");
    for (const auto& s : services_) {
      if (!(s.delay_bound > 0)) throw ValidationError("delay bound must be positive");
      if (s.paths.empty()) throw ValidationError("service without paths");
      for (const auto& path : s.paths) {
        if (path.empty() || path.front() != front)
          throw ValidationError("service path must start at the front node");
        std::vector<int> seen(path);
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
          throw ValidationError("service path repeats a node");
        for (std::size_t k = 0; k + 1 < path.size(); ++k)
          if (!has_edge(path[k], path[k + 1]))
            throw ValidationError("service path uses a missing edge");
      }
      if (s.paths.size() > 2)
        throw ValidationError("at most two alternative paths per service");
    }
    for (int j : scalable_)
      if (j < 0 || j >= n) throw ValidationError("scalable node out of range");
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<ServiceSpec> services_;
  std::vector<int> scalable_;
};

using LoadVector = std::vector<double>;

struct ControlAction {
  std::vector<double> b;  // blocking fraction per service
  std::vector<double> p;  // share routed to the service's first path
  std::vector<int> c;     // cores per scalable node

  friend bool operator==(const ControlAction&, const ControlAction&) = default;
};

struct ServiceObservation {
  double offered = 0;   // l,   req/s
  double carried = 0;   // l_c, req/s
  double d_mean = 0;    // s
  double d_var = 0;     // s^2
};

struct SystemState {
  LoadVector load;
  std::vector<double> delay;

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

struct TraceRecord {
  long t = 0;
  SystemState state;
  ControlAction action;
  std::vector<ServiceObservation> next;
};

inline double carried_load(double offered, double blocking) {
  if (!(offered >= 0) || !std::isfinite(offered))
    throw DomainError("offered load must be finite and non-negative");
  if (!(blocking >= 0 && blocking <= 1))
    throw DomainError("blocking fraction outside [0,1]");
  return offered * (1.0 - blocking);
}

// Discretization of the control knobs. An inactive knob is pinned at its
// default level: b at the lowest, p at the level nearest 0.5, c at the highest.
struct ActionGrid {
  std::vector<double> b_levels{0.0};
  std::vector<double> p_levels{0.5};
  std::vector<int> c_levels{1};
  bool blocking_active = true;
  bool routing_active = true;
  bool scaling_active = false;

  void validate() const {
    auto ascending = [](const auto& v) {
      return !v.empty() && std::adjacent_find(v.begin(), v.end(), [](auto a, auto b) {
                             return !(a < b);
                           }) == v.end();
    };
    if (!ascending(b_levels) || !ascending(p_levels) || !ascending(c_levels))
      throw ValidationError("grid levels must be non-empty and strictly ascending");
    if (b_levels.front() < 0 || b_levels.back() > 1 || p_levels.front() < 0 ||
        p_levels.back() > 1)
      throw ValidationError("b/p levels must lie in [0,1]");
    if (c_levels.front() < 1) throw ValidationError("core levels must be positive");
  }

  double default_b() const { return b_levels.front(); }
  int default_c() const { return c_levels.back(); }
  double default_p() const {
    return *std::min_element(p_levels.begin(), p_levels.end(), [](double x, double y) {
      return std::abs(x - 0.5) < std::abs(y - 0.5);
    });
  }

  ControlAction default_action(const MeshTopology& topo) const {
    return ControlAction{std::vector<double>(topo.service_count(), default_b()),
                         std::vector<double>(topo.service_count(), default_p()),
                         std::vector<int>(topo.scalable_count(), default_c())};
  }

  // FNV-1a over every level and flag; policies carry it to detect grid drift.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
      const auto* p = static_cast<const unsigned char*>(data);
      for (std::size_t k = 0; k < n; ++k) {
        h ^= p[k];
        h *= 1099511628211ull;
      }
    };
    auto mix_list = [&](const auto& v) {
      const std::uint64_t n = v.size();
      mix(&n, sizeof n);
      for (auto x : v) {
        const double d = static_cast<double>(x);
        mix(&d, sizeof d);
      }
    };
    mix_list(b_levels);
    mix_list(p_levels);
    mix_list(c_levels);
    const unsigned char flags[3] = {blocking_active, routing_active, scaling_active};
    mix(flags, 3);
    return h;
  }
};

// The enumerated joint action set as a mixed-radix product. Dimension order
// (most significant first) is b_1..b_m, p_1..p_m, c_1..c_k, which is also the
// order of the action part of a model feature vector.
class ActionTable {
 public:
  ActionTable() = default;

  ActionTable(const ActionGrid& grid, const MeshTopology& topo)
      : services_(topo.service_count()), scalable_(topo.scalable_count()) {
    grid.validate();
    auto add_dim = [&](bool active, std::vector<double> levels, double fallback) {
      dims_.push_back(active ? std::move(levels) : std::vector<double>{fallback});
    };
    std::vector<double> c_as_double(grid.c_levels.begin(), grid.c_levels.end());
    for (std::size_t i = 0; i < services_; ++i)
      add_dim(grid.blocking_active, grid.b_levels, grid.default_b());
    for (std::size_t i = 0; i < services_; ++i)
      add_dim(grid.routing_active, grid.p_levels, grid.default_p());
    for (std::size_t j = 0; j < scalable_; ++j)
      add_dim(grid.scaling_active, c_as_double, grid.default_c());

    strides_.assign(dims_.size(), 1);
    size_ = 1;
    for (std::size_t d = dims_.size(); d-- > 0;) {
      strides_[d] = size_;
      size_ *= dims_[d].size();
    }
    actions_.reserve(size_);
    for (std::size_t k = 0; k < size_; ++k) actions_.push_back(decode(k));
  }

  std::size_t size() const { return size_; }
  std::size_t dim_count() const { return dims_.size(); }
  const std::vector<double>& levels(std::size_t dim) const { return dims_[dim]; }
  std::size_t stride(std::size_t dim) const { return strides_[dim]; }
  const ControlAction& operator[](std::size_t k) const { return actions_[k]; }
  const std::vector<ControlAction>& actions() const { return actions_; }

  // Index of an action, or size() when some component is off the grid.
  std::size_t index_of(const ControlAction& a) const {
    if (a.b.size() != services_ || a.p.size() != services_ || a.c.size() != scalable_)
      return size_;
    std::size_t k = 0;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      const double v = component(a, d);
      auto it = std::find(dims_[d].begin(), dims_[d].end(), v);
      if (it == dims_[d].end()) return size_;
      k += static_cast<std::size_t>(it - dims_[d].begin()) * strides_[d];
    }
    return k;
  }

 private:
  double component(const ControlAction& a, std::size_t d) const {
    if (d < services_) return a.b[d];
    if (d < 2 * services_) return a.p[d - services_];
    return static_cast<double>(a.c[d - 2 * services_]);
  }

  ControlAction decode(std::size_t k) const {
    ControlAction a;
    a.b.resize(services_);
    a.p.resize(services_);
    a.c.resize(scalable_);
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      const double v = dims_[d][(k / strides_[d]) % dims_[d].size()];
      if (d < services_)
        a.b[d] = v;
      else if (d < 2 * services_)
        a.p[d - services_] = v;
      else
        a.c[d - 2 * services_] = static_cast<int>(v);
    }
    return a;
  }

  std::size_t services_ = 0, scalable_ = 0, size_ = 0;
  std::vector<std::vector<double>> dims_;
  std::vector<std::size_t> strides_;
  std::vector<ControlAction> actions_;
};

inline std::vector<ControlAction> enumerate_actions(const ActionGrid& grid,
                                                    const MeshTopology& topo) {
  return ActionTable(grid, topo).actions();
}

// g_i: cores allocated on the scalable nodes that any of the service's paths visit.
inline double service_cost(const ControlAction& a, std::size_t service,
                           const MeshTopology& topo) {
  double cost = 0;
  for (std::size_t j = 0; j < topo.scalable_count(); ++j)
    if (topo.on_any_path(service, topo.scalable_nodes()[j])) cost += a.c.at(j);
  return cost;
}

inline void validate_action(const ControlAction& a, const MeshTopology& topo) {
  if (a.b.size() != topo.service_count() || a.p.size() != topo.service_count() ||
      a.c.size() != topo.scalable_count())
    throw ValidationError("action arity does not match topology");
  for (double b : a.b)
    if (!(b >= 0 && b <= 1)) throw DomainError("blocking fraction outside [0,1]");
  for (double p : a.p)
    if (!(p >= 0 && p <= 1)) throw DomainError("routing weight outside [0,1]");
  for (int c : a.c)
    if (c < 1) throw DomainError("core count must be positive");
}

// The five-node mesh: a front node, two processing nodes and two database
// nodes. Information services reach a database via the upper path
// (0,1,3) or the lower path (0,2,4); the compute service runs on either
// processing node. Processing nodes carry the scalable cores.
inline std::vector<Node> standard_nodes() {
  return {{0, NodeRole::front},
          {1, NodeRole::backend},
          {2, NodeRole::backend},
          {3, NodeRole::backend},
          {4, NodeRole::backend}};
}

inline std::vector<std::pair<int, int>> standard_edges() {
  return {{0, 1}, {0, 2}, {1, 3}, {2, 4}};
}

inline ServiceSpec information_service(int id, double bound) {
  return {id, ServiceKind::information, bound, {{0, 1, 3}, {0, 2, 4}}};
}

inline ServiceSpec compute_service(int id, double bound) {
  return {id, ServiceKind::compute, bound, {{0, 1}, {0, 2}}};
}

// Services 1 and 2 (information) for scenarios 1-3; services 2 and 3
// (information + compute) for scenario 4.
inline MeshTopology standard_topology(int scenario_id, double info_bound = 0.10,
                                      double compute_bound = 0.50) {
  std::vector<ServiceSpec> services;
  if (scenario_id == 4) {
    services = {information_service(2, info_bound), compute_service(3, compute_bound)};
  } else if (scenario_id >= 1 && scenario_id <= 3) {
    services = {information_service(1, info_bound), information_service(2, info_bound)};
  } else {
    throw ValidationError("unknown scenario id " + std::to_string(scenario_id));
  }
  return MeshTopology(standard_nodes(), standard_edges(), std::move(services), {1, 2});
}

}  // namespace meshrl

#endif  // MESHRL_CORE_HPP_
