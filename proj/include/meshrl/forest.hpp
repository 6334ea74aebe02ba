#ifndef MESHRL_FOREST_HPP_
#define MESHRL_FOREST_HPP_

// Bagged CART regression forests for the learned system model
//   (d_mean_i, d_var_i) = f(l, b, p, c)
// One forest per target; a prediction is the arithmetic mean over its trees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "meshrl/core.hpp"
#include "meshrl/random.hpp"

namespace meshrl {

// Feature order: l_1..l_m, b_1..b_m, p_1..p_m, c_1..c_k. The delay part of
// the state is deliberately absent.
inline std::vector<double> make_features(const LoadVector& load, const ControlAction& a) {
  std::vector<double> x;
  x.reserve(load.size() + a.b.size() + a.p.size() + a.c.size());
  x.insert(x.end(), load.begin(), load.end());
  x.insert(x.end(), a.b.begin(), a.b.end());
  x.insert(x.end(), a.p.begin(), a.p.end());
  for (int c : a.c) x.push_back(c);
  return x;
}

inline std::vector<std::string> feature_names(std::size_t services, std::size_t scalable) {
  std::vector<std::string> names;
  for (const char* prefix : {"l", "b", "p"})
    for (std::size_t i = 0; i < services; ++i)
      names.push_back(prefix + std::to_string(i + 1));
  for (std::size_t j = 0; j < scalable; ++j) names.push_back("c" + std::to_string(j + 1));
  return names;
}

// Targets: d_mean_1..d_mean_m, d_var_1..d_var_m.
inline std::vector<std::string> target_names(std::size_t services) {
  std::vector<std::string> names;
  for (const char* prefix : {"d_mean", "d_var"})
    for (std::size_t i = 0; i < services; ++i)
      names.push_back(std::string(prefix) + std::to_string(i + 1));
  return names;
}

// Flat binary tree. Internal node k tests x[feature[k]] <= value[k] and
// continues at left[k] (true) or left[k] + 1; a leaf has feature == kLeaf
// and stores its prediction in value[k].
struct RegressionTree {
  static constexpr std::uint8_t kLeaf = 0xff;
  // Split nodes send x[feature] <= value to `left` and the rest to left + 1;
  // leaves hold their prediction in `value`. One node per 16 bytes keeps
  // the grid walk cache friendly.
  struct Node {
    double value = 0;
    std::int32_t left = -1;
    std::uint8_t feature = kLeaf;

    bool leaf() const { return feature == kLeaf; }
    friend bool operator==(const Node&, const Node&) = default;
  };
  std::vector<Node> nodes;

  std::size_t size() const { return nodes.size(); }

  double predict(const double* x) const {
    const Node* n = &nodes[0];
    while (!n->leaf()) n = &nodes[x[n->feature] <= n->value ? n->left : n->left + 1];
    return n->value;
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct ModelPrediction {
  std::vector<double> mean;
  std::vector<double> var;
};

// Model outputs for every action of an ActionTable at one load vector.
struct GridPrediction {
  std::size_t actions = 0, services = 0;
  std::vector<double> values;  // [target][action]

  double mean(std::size_t action, std::size_t service) const {
    return values[service * actions + action];
  }
  double var(std::size_t action, std::size_t service) const {
    return values[(services + service) * actions + action];
  }
};

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::size_t services, std::size_t scalable, std::uint64_t seed,
              std::vector<std::vector<RegressionTree>> forests)
      : services_(services), scalable_(scalable), seed_(seed), forests_(std::move(forests)) {
    if (forests_.size() != 2 * services_) throw ValidationError("forest/target count mismatch");
    for (const auto& f : forests_)
      if (f.empty() || f.size() != forests_.front().size())
        throw ValidationError("forests must share a non-zero tree count");
    load_thresholds_.resize(services_);
    for (const auto& f : forests_)
      for (const auto& tree : f)
        for (const auto& n : tree.nodes)
          if (n.feature < services_) load_thresholds_[n.feature].push_back(n.value);
    for (auto& v : load_thresholds_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  std::size_t service_count() const { return services_; }
  std::size_t scalable_count() const { return scalable_; }
  std::size_t feature_count() const { return 3 * services_ + scalable_; }
  std::size_t target_count() const { return 2 * services_; }
  std::size_t tree_count() const { return forests_.empty() ? 0 : forests_.front().size(); }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::vector<RegressionTree>>& forests() const { return forests_; }

  double predict_target(std::size_t target, const double* x) const {
    double sum = 0;
    for (const auto& tree : forests_[target]) sum += tree.predict(x);
    return sum / static_cast<double>(forests_[target].size());
  }

  ModelPrediction predict(const std::vector<double>& x) const {
    if (x.size() != feature_count()) throw ValidationError("feature vector arity mismatch");
    for (double v : x)
      if (!std::isfinite(v)) throw ValidationError("non-finite feature");
    ModelPrediction out{std::vector<double>(services_), std::vector<double>(services_)};
    for (std::size_t i = 0; i < services_; ++i) {
      out.mean[i] = predict_target(i, x.data());
      out.var[i] = predict_target(services_ + i, x.data());
    }
    return out;
  }

  ModelPrediction predict(const LoadVector& load, const ControlAction& a) const {
    return predict(make_features(load, a));
  }

  // Per service, the number of load thresholds strictly below the load.
  // Every split compares load <= threshold, so two loads with the same cell
  // take identical paths through every tree and get identical predictions.
  std::vector<std::uint32_t> load_cell(const LoadVector& load) const {
    if (load.size() != services_) throw ValidationError("load arity mismatch");
    std::vector<std::uint32_t> cell(services_);
    for (std::size_t i = 0; i < services_; ++i) {
      const auto& v = load_thresholds_[i];
      cell[i] = static_cast<std::uint32_t>(std::lower_bound(v.begin(), v.end(), load[i]) - v.begin());
    }
    return cell;
  }

  // Predictions for all actions of `table` at `load`. Each tree is walked
  // once: splits on load features follow one branch, splits on action
  // features cut the current box of grid levels in two. Sums run over trees
  // in the same order as predict(), so results are bit-identical to it.
  GridPrediction predict_grid(const LoadVector& load, const ActionTable& table) const {
    if (load.size() != services_ || table.dim_count() != 2 * services_ + scalable_)
      throw ValidationError("grid prediction arity mismatch");
    GridPrediction out{table.size(), services_,
                       std::vector<double>(table.size() * target_count(), 0.0)};
    const std::size_t dims = table.dim_count();
    GridWalk w{load, table, std::vector<std::size_t>(dims, 0), std::vector<std::size_t>(dims), {}, {}, nullptr};
    for (std::size_t d = 0; d < dims; ++d) {
      w.hi[d] = table.levels(d).size();
      if (w.hi[d] > 1) w.active.push_back(d);
    }
    w.idx.resize(w.active.size());
    for (std::size_t t = 0; t < target_count(); ++t) {
      w.acc = out.values.data() + t * table.size();
      for (const auto& tree : forests_[t]) walk_box(tree, 0, w);
      const double n = static_cast<double>(forests_[t].size());
      for (std::size_t k = 0; k < table.size(); ++k) w.acc[k] /= n;
    }
    return out;
  }

 private:
  // State of one grid walk: the current box [lo, hi) of level indices and
  // the grid dimensions with more than one level.
  struct GridWalk {
    const LoadVector& load;
    const ActionTable& table;
    std::vector<std::size_t> lo, hi;
    std::vector<std::size_t> active, idx;
    double* acc;
  };

  void walk_box(const RegressionTree& tree, std::int32_t k, GridWalk& w) const {
    for (;;) {
      const RegressionTree::Node& n = tree.nodes[k];
      if (n.leaf()) break;
      const std::size_t f = n.feature;
      if (f < services_) {
        k = w.load[f] <= n.value ? n.left : n.left + 1;
        continue;
      }
      const std::size_t d = f - services_;
      const auto& levels = w.table.levels(d);
      std::size_t cut = w.lo[d];
      while (cut < w.hi[d] && levels[cut] <= n.value) ++cut;
      if (cut == w.hi[d]) {
        k = n.left;
      } else if (cut == w.lo[d]) {
        k = n.left + 1;
      } else {
        const std::size_t saved = w.hi[d];
        w.hi[d] = cut;
        walk_box(tree, n.left, w);
        w.hi[d] = saved;
        const std::size_t saved_lo = w.lo[d];
        w.lo[d] = cut;
        walk_box(tree, n.left + 1, w);
        w.lo[d] = saved_lo;
        return;
      }
    }
    add_box(tree.nodes[k].value, w);
  }

  // Adds v to every action in the box. Single-level dimensions always sit
  // at index 0 and contribute nothing to the offset.
  static void add_box(double v, GridWalk& w) {
    const auto& a = w.active;
    if (a.empty()) {
      w.acc[0] += v;
      return;
    }
    const std::size_t outer = a.size() - 1, last = a.back();
    const std::size_t step = w.table.stride(last);
    for (std::size_t j = 0; j < outer; ++j) w.idx[j] = w.lo[a[j]];
    for (;;) {
      std::size_t base = 0;
      for (std::size_t j = 0; j < outer; ++j) base += w.idx[j] * w.table.stride(a[j]);
      for (std::size_t e = w.lo[last]; e < w.hi[last]; ++e) w.acc[base + e * step] += v;
      std::size_t j = outer;
      for (;;) {
        if (j == 0) return;
        --j;
        if (++w.idx[j] < w.hi[a[j]]) break;
        w.idx[j] = w.lo[a[j]];
      }
    }
  }

  std::size_t services_ = 0, scalable_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<RegressionTree>> forests_;
  std::vector<std::vector<double>> load_thresholds_;
};

struct FitOptions {
  std::size_t tree_count = 120;
  std::uint64_t seed = 0;
  std::size_t min_samples_split = 2;
  std::size_t workers = 1;
};

namespace detail {

// Feature columns quantized to the sorted distinct values of each feature.
struct BinnedFeatures {
  std::vector<std::vector<double>> uniques;       // [feature][bin]
  std::vector<std::vector<std::uint32_t>> bins;   // [feature][sample]

  BinnedFeatures(const std::vector<std::vector<double>>& rows, std::size_t features) {
    uniques.resize(features);
    bins.resize(features);
    for (std::size_t f = 0; f < features; ++f) {
      auto& u = uniques[f];
      u.reserve(rows.size());
      for (const auto& r : rows) u.push_back(r[f]);
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      bins[f].resize(rows.size());
      for (std::size_t s = 0; s < rows.size(); ++s)
        bins[f][s] = static_cast<std::uint32_t>(
            std::lower_bound(u.begin(), u.end(), rows[s][f]) - u.begin());
    }
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedFeatures& data, const std::vector<double>& y, std::size_t min_split)
      : data_(data), y_(y), min_split_(std::max<std::size_t>(min_split, 2)) {
    std::size_t widest = 0;
    for (const auto& u : data_.uniques) widest = std::max(widest, u.size());
    count_.assign(widest, 0);
    sum_.assign(widest, 0.0);
  }

  RegressionTree build(std::vector<std::uint32_t> idx) {
    RegressionTree tree;
    push_node(tree);
    struct Task {
      std::int32_t node;
      std::size_t begin, end;
    };
    std::vector<Task> stack{{0, 0, idx.size()}};
    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();
      const Split s = best_split(idx, task.begin, task.end);
      if (s.feature < 0) {
        tree.nodes[task.node].value = s.leaf_value;
        continue;
      }
      const auto& col = data_.bins[s.feature];
      auto mid = std::partition(idx.begin() + task.begin, idx.begin() + task.end,
                                [&](std::uint32_t r) { return col[r] <= s.left_bin; });
      const std::size_t cut = static_cast<std::size_t>(mid - idx.begin());
      const auto left = static_cast<std::int32_t>(tree.size());
      push_node(tree);
      push_node(tree);
      tree.nodes[task.node] = {s.threshold, left, static_cast<std::uint8_t>(s.feature)};
      stack.push_back({left + 1, cut, task.end});
      stack.push_back({left, task.begin, cut});
    }
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    std::uint32_t left_bin = 0;
    double threshold = 0;
    double leaf_value = 0;
  };

  static void push_node(RegressionTree& t) { t.nodes.emplace_back(); }

  Split best_split(const std::vector<std::uint32_t>& idx, std::size_t begin, std::size_t end) {
    Split out;
    const std::size_t n = end - begin;
    double total = 0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = begin; k < end; ++k) {
      const double v = y_[idx[k]];
      total += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.leaf_value = total / static_cast<double>(n);
    if (n < min_split_ || lo == hi) return out;

    // Maximize sum_L^2/n_L + sum_R^2/n_R, i.e. the drop in squared error.
    const double parent = total * total / static_cast<double>(n);
    double best = parent + 1e-12 * std::abs(parent);
    for (std::size_t f = 0; f < data_.bins.size(); ++f) {
      const auto& col = data_.bins[f];
      const std::size_t nbins = data_.uniques[f].size();
      if (nbins < 2) continue;
      candidates_.clear();
      if (nbins <= 4 * n) {
        std::fill_n(count_.begin(), nbins, 0u);
        std::fill_n(sum_.begin(), nbins, 0.0);
        for (std::size_t k = begin; k < end; ++k) {
          const auto b = col[idx[k]];
          ++count_[b];
          sum_[b] += y_[idx[k]];
        }
        for (std::uint32_t b = 0; b < nbins; ++b)
          if (count_[b]) candidates_.push_back({b, count_[b], sum_[b]});
      } else {
        pairs_.clear();
        for (std::size_t k = begin; k < end; ++k) pairs_.emplace_back(col[idx[k]], y_[idx[k]]);
        std::sort(pairs_.begin(), pairs_.end());
        for (const auto& [b, v] : pairs_) {
          if (candidates_.empty() || candidates_.back().bin != b)
            candidates_.push_back({b, 0, 0.0});
          ++candidates_.back().count;
          candidates_.back().sum += v;
        }
      }
      double left_sum = 0;
      std::size_t left_n = 0;
      for (std::size_t c = 0; c + 1 < candidates_.size(); ++c) {
        left_sum += candidates_[c].sum;
        left_n += candidates_[c].count;
        const double right_sum = total - left_sum;
        const std::size_t right_n = n - left_n;
        const double score = left_sum * left_sum / static_cast<double>(left_n) +
                             right_sum * right_sum / static_cast<double>(right_n);
        if (score > best) {
          best = score;
          out.feature = static_cast<int>(f);
          out.left_bin = candidates_[c].bin;
          const auto& u = data_.uniques[f];
          out.threshold = 0.5 * (u[candidates_[c].bin] + u[candidates_[c + 1].bin]);
          // Guard against midpoint rounding onto the right-hand value.
          if (!(out.threshold < u[candidates_[c + 1].bin])) out.threshold = u[candidates_[c].bin];
        }
      }
    }
    return out;
  }

  struct Candidate {
    std::uint32_t bin;
    std::uint32_t count;
    double sum;
  };

  const BinnedFeatures& data_;
  const std::vector<double>& y_;
  std::size_t min_split_;
  std::vector<std::uint32_t> count_;
  std::vector<double> sum_;
  std::vector<Candidate> candidates_;
  std::vector<std::pair<std::uint32_t, double>> pairs_;
};

}  // namespace detail

// Trains `tree_count` trees per target on bootstrap resamples. Deterministic
// for a given seed regardless of the worker count.
inline ForestModel fit_forest(const std::vector<TraceRecord>& traces,
                              const FitOptions& options = {}) {
  if (traces.size() < 100) throw ValidationError("need at least 100 trace records to fit");
  if (options.tree_count == 0) throw ValidationError("tree count must be positive");
  const std::size_t m = traces.front().state.load.size();
  const std::size_t k = traces.front().action.c.size();
  if (m == 0) throw ValidationError("trace without services");

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> targets(2 * m);
  rows.reserve(traces.size());
  for (const auto& r : traces) {
    if (r.state.load.size() != m || r.action.b.size() != m || r.action.p.size() != m ||
        r.action.c.size() != k || r.next.size() != m)
      throw ValidationError("trace records come from different topologies");
    rows.push_back(make_features(r.state.load, r.action));
    for (double v : rows.back())
      if (!std::isfinite(v)) throw ValidationError("non-finite feature in traces");
    for (std::size_t i = 0; i < m; ++i) {
      const double mean = r.next[i].d_mean, var = r.next[i].d_var;
      if (!std::isfinite(mean) || !std::isfinite(var) || mean < 0 || var < 0)
        throw ValidationError("non-finite or negative delay target in traces");
      targets[i].push_back(mean);
      targets[m + i].push_back(var);
    }
  }
  const detail::BinnedFeatures data(rows, 3 * m + k);
  const std::size_t n = rows.size();
  const std::size_t jobs = targets.size() * options.tree_count;

  std::vector<std::vector<RegressionTree>> forests(targets.size(),
                                                   std::vector<RegressionTree>(options.tree_count));
  auto work = [&](std::size_t first, std::size_t stride) {
    std::vector<detail::TreeBuilder> builders;
    for (const auto& y : targets) builders.emplace_back(data, y, options.min_samples_split);
    for (std::size_t job = first; job < jobs; job += stride) {
      const std::size_t target = job / options.tree_count, tree = job % options.tree_count;
      Rng rng(hash_counter({options.seed, target, tree}));
      std::vector<std::uint32_t> sample(n);
      for (auto& s : sample) s = static_cast<std::uint32_t>(rng.below(n));
      forests[target][tree] = builders[target].build(std::move(sample));
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, jobs));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  return ForestModel(m, k, options.seed, std::move(forests));
}

// --- persistence -----------------------------------------------------------
//
// Little-endian binary layout, version 1:
//   "MESHRLFM" u32 version u32 services u32 scalable u32 trees u64 seed
//   str feature_order str target_order      (str = u32 length + bytes)
//   per target, per tree: u32 nodes, u8[nodes], f64[nodes], i32[nodes]

inline constexpr char kForestMagic[8] = {'M', 'E', 'S', 'H', 'R', 'L', 'F', 'M'};
inline constexpr std::uint32_t kForestVersion = 1;

namespace detail {
template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void put_array(std::ostream& os, const std::vector<T>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(T)));
}
inline void put_string(std::ostream& os, const std::string& s) {
  put(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ValidationError("truncated model file");
  return v;
}
template <typename T>
void get_array(std::istream& is, std::vector<T>& v, std::size_t n) {
  v.resize(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T))))
    throw ValidationError("truncated model file");
}
inline std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  if (n > (1u << 20)) throw ValidationError("corrupt model file string");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw ValidationError("truncated model file");
  return s;
}
inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}
}  // namespace detail

inline void save_forest(std::ostream& os, const ForestModel& model) {
  os.write(kForestMagic, sizeof kForestMagic);
  detail::put(os, kForestVersion);
  detail::put(os, static_cast<std::uint32_t>(model.service_count()));
  detail::put(os, static_cast<std::uint32_t>(model.scalable_count()));
  detail::put(os, static_cast<std::uint32_t>(model.tree_count()));
  detail::put(os, model.seed());
  detail::put_string(os, detail::join(feature_names(model.service_count(), model.scalable_count())));
  detail::put_string(os, detail::join(target_names(model.service_count())));
  for (const auto& forest : model.forests())
    for (const auto& tree : forest) {
      std::vector<std::uint8_t> feature;
      std::vector<double> value;
      std::vector<std::int32_t> left;
      for (const auto& n : tree.nodes) {
        feature.push_back(n.feature);
        value.push_back(n.value);
        left.push_back(n.left);
      }
      detail::put(os, static_cast<std::uint32_t>(tree.size()));
      detail::put_array(os, feature);
      detail::put_array(os, value);
      detail::put_array(os, left);
    }
  if (!os) throw ValidationError("failed writing model");
}

inline ForestModel load_forest(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kForestMagic, 8) != 0)
    throw ValidationError("not a forest model file");
  if (detail::get<std::uint32_t>(is) != kForestVersion)
    throw ValidationError("unsupported model file version");
  const auto m = detail::get<std::uint32_t>(is);
  const auto k = detail::get<std::uint32_t>(is);
  const auto trees = detail::get<std::uint32_t>(is);
  const auto seed = detail::get<std::uint64_t>(is);
  if (m == 0 || m > 64 || k > 64 || trees == 0) throw ValidationError("corrupt model header");
  if (detail::get_string(is) != detail::join(feature_names(m, k)) ||
      detail::get_string(is) != detail::join(target_names(m)))
    throw ValidationError("model feature/target order mismatch");
  const std::size_t features = 3 * m + k;
  std::vector<std::vector<RegressionTree>> forests(2 * m, std::vector<RegressionTree>(trees));
  for (auto& forest : forests)
    for (auto& tree : forest) {
      const auto nodes = detail::get<std::uint32_t>(is);
      if (nodes == 0 || nodes > (1u << 28)) throw ValidationError("corrupt tree size");
      std::vector<std::uint8_t> feature;
      std::vector<double> value;
      std::vector<std::int32_t> left;
      detail::get_array(is, feature, nodes);
      detail::get_array(is, value, nodes);
      detail::get_array(is, left, nodes);
      tree.nodes.resize(nodes);
      for (std::size_t n = 0; n < nodes; ++n) {
        tree.nodes[n] = {value[n], left[n], feature[n]};
        if (feature[n] == RegressionTree::kLeaf) continue;
        if (feature[n] >= features || left[n] <= static_cast<std::int32_t>(n) ||
            static_cast<std::size_t>(left[n]) + 1 >= nodes)
          throw ValidationError("corrupt tree node");
      }
    }
  return ForestModel(m, k, seed, std::move(forests));
}

}  // namespace meshrl

#endif  // MESHRL_FOREST_HPP_
