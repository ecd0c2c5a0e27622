#pragma once

// CART random forest over sparse features: bootstrap samples, weighted Gini
// impurity, per-node random feature subsets, majority-vote prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "issuelinks/detail/hash.hpp"
#include "issuelinks/detail/parallel.hpp"
#include "issuelinks/detail/random.hpp"
#include "issuelinks/error.hpp"
#include "issuelinks/sparse.hpp"

namespace issuelinks {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;     // unlimited when empty
  std::optional<std::size_t> max_features;  // ceil(sqrt(d)) when empty
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

class DecisionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // x <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t label = 0;  // leaf class
  };

  std::size_t predict(std::span<const std::uint32_t> idx, std::span<const double> val) const {
    std::size_t n = 0;
    while (nodes_[n].feature >= 0) {
      const auto& node = nodes_[n];
      const double x = sparse_at(idx, val, static_cast<std::uint32_t>(node.feature));
      n = static_cast<std::size_t>(x <= node.threshold ? node.left : node.right);
    }
    return static_cast<std::size_t>(nodes_[n].label);
  }

  std::span<const Node> nodes() const { return nodes_; }
  std::size_t depth() const { return depth_; }

  nlohmann::json to_json() const {
    std::vector<std::int32_t> feature, left, right, label;
    std::vector<double> threshold;
    for (const auto& n : nodes_) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      label.push_back(n.label);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"label", label}};
  }

  static DecisionTree from_json(const nlohmann::json& j) {
    DecisionTree t;
    const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<std::int32_t>>();
    const auto right = j.at("right").get<std::vector<std::int32_t>>();
    const auto label = j.at("label").get<std::vector<std::int32_t>>();
    for (std::size_t i = 0; i < feature.size(); ++i) {
      t.nodes_.push_back(Node{feature[i], threshold[i], left[i], right[i], label[i]});
    }
    return t;
  }

 private:
  friend class TreeBuilder;
  std::vector<Node> nodes_;
  std::size_t depth_ = 0;
};

/// Grows one tree. Features are drawn per node from those that are non-zero
/// for at least one sample in the node; all-zero features cannot split.
class TreeBuilder {
 public:
  TreeBuilder(const CsrMatrix& x, std::span<const std::size_t> y, std::size_t n_classes,
              std::span<const double> class_weight, const ForestConfig& cfg)
      : x_(x), y_(y), k_(n_classes), class_weight_(class_weight), cfg_(cfg) {
    mtry_ = cfg.max_features.value_or(
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(std::max<std::size_t>(x.cols, 1))))));
    mtry_ = std::max<std::size_t>(mtry_, 1);
    stamp_.assign(x.cols, 0);
    slot_.assign(x.cols, -1);
  }

  DecisionTree build(std::uint64_t seed) {
    detail::Rng rng(seed);
    const std::size_t n = x_.rows();
    std::vector<std::uint32_t> draws(n, 0);
    for (std::size_t i = 0; i < n; ++i) ++draws[rng.below(n)];
    samples_.clear();
    weights_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (draws[i] == 0) continue;
      samples_.push_back(i);
      weights_.push_back(static_cast<double>(draws[i]) * class_weight_[y_[i]]);
    }
    value_.assign(samples_.size(), 0.0);

    DecisionTree tree;
    struct Pending {
      std::size_t begin, end, depth;
      std::int32_t node;
    };
    tree.nodes_.emplace_back();
    std::vector<Pending> stack{{0, samples_.size(), 0, 0}};
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      tree.depth_ = std::max(tree.depth_, p.depth);
      std::vector<double> totals(k_, 0.0);
      for (std::size_t s = p.begin; s < p.end; ++s) totals[y_[samples_[s]]] += weights_[s];
      tree.nodes_[p.node].label = static_cast<std::int32_t>(argmax(totals));

      std::size_t nonempty = 0;
      for (double t : totals) nonempty += t > 0.0 ? 1 : 0;
      const bool depth_reached = cfg_.max_depth && p.depth >= *cfg_.max_depth;
      if (nonempty <= 1 || p.end - p.begin < 2 || depth_reached) continue;

      auto split = best_split(p.begin, p.end, totals, rng);
      if (!split) continue;

      // Partition [begin, end) by the chosen feature.
      load_values(p.begin, p.end, split->feature);
      std::size_t mid = p.begin;
      for (std::size_t s = p.begin; s < p.end; ++s) {
        if (value_[s] <= split->threshold) {
          std::swap(samples_[s], samples_[mid]);
          std::swap(weights_[s], weights_[mid]);
          std::swap(value_[s], value_[mid]);
          ++mid;
        }
      }
      if (mid == p.begin || mid == p.end) continue;

      const auto left = static_cast<std::int32_t>(tree.nodes_.size());
      tree.nodes_.emplace_back();
      const auto right = static_cast<std::int32_t>(tree.nodes_.size());
      tree.nodes_.emplace_back();
      auto& node = tree.nodes_[p.node];
      node.feature = static_cast<std::int32_t>(split->feature);
      node.threshold = split->threshold;
      node.left = left;
      node.right = right;
      stack.push_back({mid, p.end, p.depth + 1, right});
      stack.push_back({p.begin, mid, p.depth + 1, left});
    }
    return tree;
  }

 private:
  struct Split {
    std::uint32_t feature;
    double threshold;
    double score;
  };

  static std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] > v[best]) best = i;
    }
    return best;
  }

  void load_values(std::size_t begin, std::size_t end, std::uint32_t feature) {
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t r = samples_[s];
      value_[s] = sparse_at(x_.row_indices(r), x_.row_values(r), feature);
    }
  }

  std::optional<Split> best_split(std::size_t begin, std::size_t end, std::span<const double> totals,
                                  detail::Rng& rng) {
    ++epoch_;
    std::vector<std::uint32_t> candidates;
    for (std::size_t s = begin; s < end; ++s) {
      for (std::uint32_t f : x_.row_indices(samples_[s])) {
        if (stamp_[f] != epoch_) {
          stamp_[f] = epoch_;
          candidates.push_back(f);
        }
      }
    }
    if (candidates.empty()) return std::nullopt;
    std::sort(candidates.begin(), candidates.end());

    // Features are examined in random order until mtry of them yielded a
    // valid split or the candidates run out.
    std::vector<std::uint32_t> order = std::move(candidates);
    rng.shuffle(std::span<std::uint32_t>(order));

    struct Entry {
      double value;
      std::size_t cls;
      double weight;
    };
    std::optional<Split> best;
    std::size_t evaluated = 0;
    const std::size_t batch = mtry_;
    std::size_t cursor = 0;
    std::vector<std::vector<Entry>> entries;
    while (evaluated < mtry_ && cursor < order.size()) {
      const std::size_t take = std::min(batch, order.size() - cursor);
      entries.assign(take, {});
      for (std::size_t k = 0; k < take; ++k) slot_[order[cursor + k]] = static_cast<std::int32_t>(k);
      for (std::size_t s = begin; s < end; ++s) {
        const std::size_t r = samples_[s];
        const auto idx = x_.row_indices(r);
        const auto val = x_.row_values(r);
        for (std::size_t q = 0; q < idx.size(); ++q) {
          const std::int32_t sl = slot_[idx[q]];
          if (sl >= 0) entries[static_cast<std::size_t>(sl)].push_back({val[q], y_[r], weights_[s]});
        }
      }
      for (std::size_t k = 0; k < take && evaluated < mtry_; ++k) {
        const std::uint32_t f = order[cursor + k];
        auto& e = entries[k];
        // Samples without an entry hold zero for this feature.
        std::vector<double> zero(totals.begin(), totals.end());
        for (const auto& en : e) zero[en.cls] -= en.weight;
        for (std::size_t c = 0; c < k_; ++c) {
          if (zero[c] > 1e-12 * (totals[c] + 1.0)) e.push_back({0.0, c, zero[c]});
        }
        std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) {
          if (a.value != b.value) return a.value < b.value;
          return a.cls < b.cls;
        });
        if (e.empty() || e.front().value == e.back().value) continue;
        ++evaluated;
        if (auto sp = scan(e, totals, f); sp && (!best || sp->score > best->score)) best = sp;
      }
      for (std::size_t k = 0; k < take; ++k) slot_[order[cursor + k]] = -1;
      cursor += take;
    }
    return best;
  }

  // Maximizes sum_c l_c^2 / W_l + sum_c r_c^2 / W_r, which is equivalent to
  // minimizing the weighted Gini impurity of the two children.
  template <typename Entries>
  std::optional<Split> scan(const Entries& e, std::span<const double> totals, std::uint32_t feature) const {
    double w_total = 0.0;
    double sq_right = 0.0;
    for (double t : totals) {
      w_total += t;
      sq_right += t * t;
    }
    std::vector<double> left(k_, 0.0);
    double w_left = 0.0;
    double sq_left = 0.0;
    std::optional<Split> best;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      const auto c = e[i].cls;
      const double w = e[i].weight;
      const double lc = left[c];
      const double rc = totals[c] - lc;
      sq_left += (lc + w) * (lc + w) - lc * lc;
      sq_right += (rc - w) * (rc - w) - rc * rc;
      left[c] = lc + w;
      w_left += w;
      if (e[i + 1].value == e[i].value) continue;
      const double w_right = w_total - w_left;
      if (w_left <= 0.0 || w_right <= 0.0) continue;
      const double score = sq_left / w_left + sq_right / w_right;
      if (!best || score > best->score) {
        double threshold = 0.5 * (e[i].value + e[i + 1].value);
        if (threshold >= e[i + 1].value) threshold = e[i].value;
        best = Split{feature, threshold, score};
      }
    }
    if (best) {
      // Normalize by the parent proxy so scores are comparable across features.
      double parent = 0.0;
      for (double t : totals) parent += t * t;
      best->score -= parent / w_total;
    }
    return best;
  }

  const CsrMatrix& x_;
  std::span<const std::size_t> y_;
  std::size_t k_;
  std::span<const double> class_weight_;
  ForestConfig cfg_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> samples_;
  std::vector<double> weights_;
  std::vector<double> value_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::int32_t> slot_;
  std::uint32_t epoch_ = 0;
};

class RandomForest {
 public:
  RandomForest() = default;

  static RandomForest train(const CsrMatrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                            std::span<const double> class_weight, const ForestConfig& cfg) {
    if (cfg.n_trees < 1) throw Error(ErrorKind::InvalidArgument, "n_trees must be at least 1");
    RandomForest f;
    f.n_classes_ = n_classes;
    f.dimension_ = x.cols;
    f.trees_.resize(cfg.n_trees);
    // Tree i always uses seed_i = derive(seed, i), so thread count does not
    // change the result.
    detail::parallel_for(cfg.n_trees, cfg.jobs, [&](std::size_t i) {
      TreeBuilder builder(x, y, n_classes, class_weight, cfg);
      f.trees_[i] = builder.build(detail::derive_seed(cfg.seed, i));
    });
    return f;
  }

  std::vector<std::int64_t> votes(std::span<const std::uint32_t> idx, std::span<const double> val) const {
    std::vector<std::int64_t> v(n_classes_, 0);
    for (const auto& t : trees_) ++v[t.predict(idx, val)];
    return v;
  }

  std::size_t n_classes() const { return n_classes_; }
  std::size_t dimension() const { return dimension_; }
  std::span<const DecisionTree> trees() const { return trees_; }

  nlohmann::json to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"n_classes", n_classes_}, {"dimension", dimension_}, {"trees", trees}};
  }

  static RandomForest from_json(const nlohmann::json& j) {
    RandomForest f;
    f.n_classes_ = j.at("n_classes").get<std::size_t>();
    f.dimension_ = j.at("dimension").get<std::size_t>();
    for (const auto& t : j.at("trees")) f.trees_.push_back(DecisionTree::from_json(t));
    return f;
  }

 private:
  std::size_t n_classes_ = 0;
  std::size_t dimension_ = 0;
  std::vector<DecisionTree> trees_;
};

}  // namespace issuelinks
