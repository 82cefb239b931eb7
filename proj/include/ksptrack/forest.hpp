#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ksptrack/config.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/features.hpp"
#include "ksptrack/rng.hpp"
#include "ksptrack/superpixels.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

/// Positive / unlabeled partition of all superpixels (by global index).
class SampleSplit {
 public:
  SampleSplit() = default;
  explicit SampleSplit(std::size_t total) : positive_(total, 0) {}

  [[nodiscard]] std::size_t total() const noexcept { return positive_.size(); }
  [[nodiscard]] bool is_positive(std::size_t g) const { return positive_.at(g) != 0; }
  void mark_positive(std::size_t g) { positive_.at(g) = 1; }

  [[nodiscard]] std::vector<std::size_t> positives() const { return collect(1); }
  [[nodiscard]] std::vector<std::size_t> unlabeled() const { return collect(0); }
  [[nodiscard]] std::size_t positive_count() const {
    return static_cast<std::size_t>(std::count(positive_.begin(), positive_.end(), 1));
  }

  friend bool operator==(const SampleSplit&, const SampleSplit&) = default;

 private:
  [[nodiscard]] std::vector<std::size_t> collect(std::uint8_t flag) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < positive_.size(); ++i)
      if (positive_[i] == flag) out.push_back(i);
    return out;
  }

  std::vector<std::uint8_t> positive_;
};

/// Superpixels containing any annotation point are positive.
inline SampleSplit split_samples(const SuperpixelMap& sp, const PointAnnotations& pts) {
  if (pts.frame_count() != sp.frame_count())
    throw ValidationError("split_samples: annotation frame count does not match superpixels");
  pts.check_bounds(sp.width(), sp.height());
  SampleSplit split(sp.total());
  for (std::size_t t = 0; t < pts.frame_count(); ++t)
    for (const auto& g : pts.in_frame(t)) split.mark_positive(sp.global_index(sp.containing(t, g)));
  return split;
}

/// Adds the given superpixels (global indices) to the positive set.
inline SampleSplit augment_positives(SampleSplit split, std::span<const std::size_t> superpixels) {
  for (auto g : superpixels) split.mark_positive(g);
  return split;
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // positive fraction at the node

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Binary tree with axis-aligned `x[feature] <= threshold` splits.
class DecisionTree {
 public:
  [[nodiscard]] double predict(std::span<const double> x) const {
    int i = 0;
    while (nodes_[i].feature >= 0) i = x[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return nodes_[i].value;
  }
  [[nodiscard]] const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] std::vector<TreeNode>& nodes() noexcept { return nodes_; }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

namespace detail {

/// Gini impurity of a node times n/2, as an exact fraction num/den:
/// n * 2p(1-p) / 2 = pos * neg / n.
struct Fraction {
  __int128 num;
  __int128 den;
};

inline Fraction child_impurity(std::int64_t lp, std::int64_t ln, std::int64_t rp, std::int64_t rn) {
  const std::int64_t l = lp + ln;
  const std::int64_t r = rp + rn;
  // lp*ln/l + rp*rn/r
  return {static_cast<__int128>(lp) * ln * r + static_cast<__int128>(rp) * rn * l, static_cast<__int128>(l) * r};
}

inline bool frac_less(const Fraction& a, const Fraction& b) { return a.num * b.den < b.num * a.den; }

struct TrainingData {
  int dim = 0;
  std::vector<double> x;        // n x dim
  std::vector<std::uint8_t> y;  // 1 = positive
  [[nodiscard]] double at(std::size_t i, int f) const { return x[i * dim + f]; }
};

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  Fraction score{0, 1};
};

inline void best_split_on_feature(const TrainingData& data, std::span<std::uint32_t> idx, int f,
                                  std::vector<std::uint32_t>& scratch, const Fraction& parent, SplitChoice& best) {
  scratch.assign(idx.begin(), idx.end());
  std::stable_sort(scratch.begin(), scratch.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return data.at(a, f) < data.at(b, f); });
  std::int64_t total_pos = 0;
  for (auto i : scratch) total_pos += data.y[i];
  const auto n = static_cast<std::int64_t>(scratch.size());
  std::int64_t lp = 0;
  for (std::int64_t k = 0; k + 1 < n; ++k) {
    lp += data.y[scratch[k]];
    const double a = data.at(scratch[k], f);
    const double b = data.at(scratch[k + 1], f);
    if (!(a < b)) continue;
    const std::int64_t l = k + 1;
    const auto score = child_impurity(lp, l - lp, total_pos - lp, (n - l) - (total_pos - lp));
    if (!frac_less(score, parent)) continue;  // must strictly decrease impurity
    if (!best.found || frac_less(score, best.score)) {
      double mid = 0.5 * (a + b);
      if (!(mid < b)) mid = a;
      best = {true, f, mid, score};
    }
  }
}

inline DecisionTree grow_tree(const TrainingData& data, Rng& rng) {
  DecisionTree tree;
  auto& nodes = tree.nodes();
  const auto n = static_cast<std::uint32_t>(data.y.size());
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0U);
  std::vector<std::uint32_t> scratch;
  std::vector<int> features(data.dim);
  const int n_candidates = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.dim)))));

  struct Task {
    int node;
    std::uint32_t begin, end;
  };
  std::vector<Task> stack;
  nodes.emplace_back();
  stack.push_back({0, 0, n});
  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    const std::span<std::uint32_t> range(idx.data() + task.begin, task.end - task.begin);
    std::int64_t pos = 0;
    for (auto i : range) pos += data.y[i];
    const auto count = static_cast<std::int64_t>(range.size());
    nodes[task.node].value = count == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(count);
    if (count < 2 || pos == 0 || pos == count) continue;

    const Fraction parent{static_cast<__int128>(pos) * (count - pos), count};
    // Candidate features are drawn without replacement; if none of a batch
    // admits an impurity-decreasing split, the next batch is tried.
    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < data.dim; ++k) {
      const auto j = k + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(data.dim - k)));
      std::swap(features[k], features[j]);
    }
    SplitChoice best;
    for (int start = 0; start < data.dim && !best.found; start += n_candidates) {
      const int stop = std::min(data.dim, start + n_candidates);
      std::vector<int> batch(features.begin() + start, features.begin() + stop);
      std::sort(batch.begin(), batch.end());  // ties resolve to the lowest feature index
      for (int f : batch) best_split_on_feature(data, range, f, scratch, parent, best);
    }
    if (!best.found) continue;

    const auto mid_it = std::stable_partition(range.begin(), range.end(), [&](std::uint32_t i) {
      return data.at(i, best.feature) <= best.threshold;
    });
    const auto mid = task.begin + static_cast<std::uint32_t>(mid_it - range.begin());
    const int left = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes.emplace_back();
    nodes[task.node].feature = best.feature;
    nodes[task.node].threshold = best.threshold;
    nodes[task.node].left = left;
    nodes[task.node].right = left + 1;
    stack.push_back({left + 1, mid, task.end});
    stack.push_back({left, task.begin, mid});
  }
  return tree;
}

}  // namespace detail

/// M bagged trees. Record of each tree's bootstrap negatives kept for replay.
struct BaggedForest {
  int feature_dim = 0;
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> tree_streams;
  std::vector<std::vector<std::size_t>> sampled_negatives;

  [[nodiscard]] double predict(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != feature_dim)
      throw ValidationError("forest: feature dimension " + std::to_string(x.size()) + " does not match " +
                            std::to_string(feature_dim));
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
  }

  void dump(std::ostream& os) const {
    for (std::size_t k = 0; k < trees.size(); ++k) {
      os << "tree " << k << '\n';
      const auto& nodes = trees[k].nodes();
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& nd = nodes[i];
        if (nd.feature < 0)
          os << "  " << i << " leaf " << nd.value << '\n';
        else
          os << "  " << i << " split f" << nd.feature << " <= " << nd.threshold << " -> " << nd.left << ' '
             << nd.right << '\n';
      }
    }
  }
};

/// Per-superpixel objectness rho in [0, 1], indexed by global superpixel index.
struct ObjectnessTable {
  std::vector<double> values;
  friend bool operator==(const ObjectnessTable&, const ObjectnessTable&) = default;
};

/// Trains cfg.n_trees trees. Tree k sees every positive plus |S^p| unlabeled
/// samples drawn with replacement (treated as negatives), drawn from stream
/// stream_key(ForestTree, direction, iteration, k).
inline BaggedForest train_forest(const SampleSplit& split, const FeatureTable& feats, const Config& cfg,
                                 std::uint64_t direction = 0, std::uint64_t iteration = 0) {
  if (feats.rows() != split.total()) throw ValidationError("train_forest: feature table does not cover the split");
  const auto positives = split.positives();
  if (positives.empty()) throw ValidationError("train_forest: positive set is empty (no annotated superpixel)");
  const auto unlabeled = split.unlabeled();

  BaggedForest forest;
  forest.feature_dim = feats.dim();
  forest.trees.reserve(cfg.n_trees);
  detail::TrainingData data;
  data.dim = feats.dim();
  for (int k = 0; k < cfg.n_trees; ++k) {
    const auto stream = stream_key(StreamPurpose::ForestTree, direction, iteration, static_cast<std::uint64_t>(k));
    auto rng = seeded_rng(cfg.rng_seed, stream);
    std::vector<std::size_t> negatives;
    if (!unlabeled.empty()) {
      negatives.reserve(positives.size());
      for (std::size_t i = 0; i < positives.size(); ++i) negatives.push_back(unlabeled[uniform_index(rng, unlabeled.size())]);
    }
    data.x.clear();
    data.y.clear();
    auto push = [&](std::size_t g, std::uint8_t label) {
      const auto row = feats.row(g);
      data.x.insert(data.x.end(), row.begin(), row.end());
      data.y.push_back(label);
    };
    for (auto g : positives) push(g, 1);
    for (auto g : negatives) push(g, 0);
    forest.trees.push_back(detail::grow_tree(data, rng));
    forest.tree_streams.push_back(stream);
    forest.sampled_negatives.push_back(std::move(negatives));
  }
  return forest;
}

inline ObjectnessTable predict_objectness(const BaggedForest& forest, const FeatureTable& feats) {
  if (feats.dim() != forest.feature_dim)
    throw ValidationError("predict_objectness: feature dimension " + std::to_string(feats.dim()) +
                          " does not match forest dimension " + std::to_string(forest.feature_dim));
  ObjectnessTable out;
  out.values.resize(feats.rows());
  for (std::size_t i = 0; i < feats.rows(); ++i) out.values[i] = forest.predict(feats.row(i));
  return out;
}

}  // namespace ksptrack
