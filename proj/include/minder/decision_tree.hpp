// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "minder/error.hpp"
#include "minder/metric.hpp"
#include "minder/zscore.hpp"

namespace minder {

/// Binary CART classifier over per-metric max-Z features.
struct DecisionTree {
    struct Node {
        bool is_leaf = true;
        // split
        MetricKind split_metric = MetricKind::CpuUsage;
        double threshold = 0.0;  // value <= threshold goes left
        std::int32_t left = -1;
        std::int32_t right = -1;
        // leaf
        SpanLabel label = SpanLabel::Normal;
        double purity = 1.0;
        // bookkeeping for audit output
        std::size_t n_normal = 0;
        std::size_t n_abnormal = 0;
        std::size_t depth = 0;
    };

    std::vector<Node> nodes;  // nodes[0] is the root
    std::size_t max_depth = 0;

    SpanLabel classify(const std::map<MetricKind, double>& features) const {
        if (nodes.empty()) throw ConfigError("classify on empty tree");
        std::size_t idx = 0;
        while (!nodes[idx].is_leaf) {
            const auto it = features.find(nodes[idx].split_metric);
            if (it == features.end())
                throw UnknownMetric("feature missing metric " +
                                    std::string(metric_name(nodes[idx].split_metric)));
            idx = static_cast<std::size_t>(it->second <= nodes[idx].threshold ? nodes[idx].left
                                                                              : nodes[idx].right);
        }
        return nodes[idx].label;
    }
};

namespace detail {

inline double gini(std::size_t n_normal, std::size_t n_abnormal) {
    const std::size_t n = n_normal + n_abnormal;
    if (n == 0) return 0.0;
    const double p0 = static_cast<double>(n_normal) / static_cast<double>(n);
    const double p1 = static_cast<double>(n_abnormal) / static_cast<double>(n);
    return 1.0 - p0 * p0 - p1 * p1;
}

struct SplitChoice {
    std::size_t feature_index = 0;  // index into the catalog-ordered feature list
    double threshold = 0.0;
    double gain = -1.0;
};

/// Greedy best split by Gini impurity decrease over midpoint candidates.
/// Ties break toward the lower feature index, then the lower threshold.
/// `rows` are indices into the dataset; `column` fetches feature values.
template <typename ColumnFn, typename LabelFn>
inline std::optional<SplitChoice> best_split(const std::vector<std::size_t>& rows,
                                             std::size_t n_features, ColumnFn column,
                                             LabelFn label_of, std::size_t min_samples_leaf) {
    const std::size_t n = rows.size();
    std::size_t total_abnormal = 0;
    for (std::size_t r : rows) total_abnormal += label_of(r) == SpanLabel::Abnormal ? 1 : 0;
    const std::size_t total_normal = n - total_abnormal;
    const double parent_gini = gini(total_normal, total_abnormal);

    SplitChoice best;
    std::vector<std::pair<double, SpanLabel>> vals;
    vals.reserve(n);

    for (std::size_t f = 0; f < n_features; ++f) {
        vals.clear();
        for (std::size_t r : rows) vals.emplace_back(column(r, f), label_of(r));
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        std::size_t left_abnormal = 0;
        std::size_t left_n = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            ++left_n;
            left_abnormal += vals[i].second == SpanLabel::Abnormal ? 1 : 0;
            if (vals[i].first == vals[i + 1].first) continue;  // midpoints of distinct values only
            const std::size_t right_n = n - left_n;
            if (left_n < min_samples_leaf || right_n < min_samples_leaf) continue;
            const std::size_t left_normal = left_n - left_abnormal;
            const std::size_t right_abnormal = total_abnormal - left_abnormal;
            const std::size_t right_normal = right_n - right_abnormal;
            const double child =
                (static_cast<double>(left_n) * gini(left_normal, left_abnormal) +
                 static_cast<double>(right_n) * gini(right_normal, right_abnormal)) /
                static_cast<double>(n);
            const double gain = parent_gini - child;
            const double threshold = 0.5 * (vals[i].first + vals[i + 1].first);
            const bool better = gain > best.gain ||
                                (gain == best.gain &&
                                 (f < best.feature_index ||
                                  (f == best.feature_index && threshold < best.threshold)));
            if (better) {
                best = SplitChoice{f, threshold, gain};
            }
        }
    }
    if (best.gain <= 0.0) return std::nullopt;
    return best;
}

}  // namespace detail

/// CART induction. The dataset must contain both classes; features are read
/// in the given catalog order (also the tie-break order).
inline DecisionTree train_tree(const std::vector<ZScoreFeature>& dataset,
                               const std::vector<MetricKind>& catalog, std::size_t max_depth = 7,
                               std::size_t min_samples_leaf = 1) {
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    std::size_t n_abnormal = 0;
    for (const auto& inst : dataset) n_abnormal += inst.label == SpanLabel::Abnormal ? 1 : 0;
    if (dataset.empty() || n_abnormal == 0 || n_abnormal == dataset.size())
        throw SingleClassDataset("tree induction needs both classes present");

    // Materialize the feature matrix in catalog order.
    std::vector<double> matrix(dataset.size() * catalog.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (std::size_t f = 0; f < catalog.size(); ++f) {
            const auto it = dataset[i].per_metric_max_z.find(catalog[f]);
            if (it == dataset[i].per_metric_max_z.end())
                throw UnknownMetric("instance missing metric " +
                                    std::string(metric_name(catalog[f])));
            if (!std::isfinite(it->second) || it->second < 0.0)
                throw ConfigError("max-Z features must be finite and >= 0");
            matrix[i * catalog.size() + f] = it->second;
        }
    }
    auto column = [&](std::size_t row, std::size_t f) { return matrix[row * catalog.size() + f]; };
    auto label_of = [&](std::size_t row) { return dataset[row].label; };

    DecisionTree tree;
    tree.max_depth = max_depth;

    struct Work {
        std::vector<std::size_t> rows;
        std::size_t depth;
        std::int32_t node_index;
    };

    auto make_node = [&](const std::vector<std::size_t>& rows, std::size_t depth) {
        DecisionTree::Node node;
        node.depth = depth;
        node.n_abnormal = 0;
        for (std::size_t r : rows) node.n_abnormal += label_of(r) == SpanLabel::Abnormal ? 1 : 0;
        node.n_normal = rows.size() - node.n_abnormal;
        node.label = node.n_abnormal > node.n_normal ? SpanLabel::Abnormal : SpanLabel::Normal;
        node.purity = rows.empty() ? 1.0
                                   : static_cast<double>(std::max(node.n_normal, node.n_abnormal)) /
                                         static_cast<double>(rows.size());
        return node;
    };

    std::vector<Work> stack;
    {
        std::vector<std::size_t> all(dataset.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        tree.nodes.push_back(make_node(all, 0));
        stack.push_back({std::move(all), 0, 0});
    }

    // Depth-first, left before right, so node layout is deterministic.
    while (!stack.empty()) {
        Work work = std::move(stack.back());
        stack.pop_back();
        DecisionTree::Node& node = tree.nodes[static_cast<std::size_t>(work.node_index)];

        const bool pure = node.n_normal == 0 || node.n_abnormal == 0;
        if (pure || work.depth >= max_depth || work.rows.size() < 2 * min_samples_leaf) continue;

        auto split =
            detail::best_split(work.rows, catalog.size(), column, label_of, min_samples_leaf);
        if (!split) continue;

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : work.rows) {
            (column(r, split->feature_index) <= split->threshold ? left_rows : right_rows)
                .push_back(r);
        }

        node.is_leaf = false;
        node.split_metric = catalog[split->feature_index];
        node.threshold = split->threshold;

        const auto left_index = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back(make_node(left_rows, work.depth + 1));
        const auto right_index = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back(make_node(right_rows, work.depth + 1));
        tree.nodes[static_cast<std::size_t>(work.node_index)].left = left_index;
        tree.nodes[static_cast<std::size_t>(work.node_index)].right = right_index;

        // Push right first so the left subtree is laid out first.
        stack.push_back({std::move(right_rows), work.depth + 1, right_index});
        stack.push_back({std::move(left_rows), work.depth + 1, left_index});
    }
    return tree;
}

/// Metric ordering derived from the tree: metrics that split closer to the
/// root come first; metrics the tree never uses follow in catalog order.
struct PriorityList {
    struct Entry {
        MetricKind metric;
        std::int32_t min_depth;  // -1 when the tree does not use the metric
    };
    std::vector<Entry> ordered;

    std::vector<MetricKind> metrics() const {
        std::vector<MetricKind> out;
        out.reserve(ordered.size());
        for (const auto& e : ordered) out.push_back(e.metric);
        return out;
    }
};

inline PriorityList extract_priority(const DecisionTree& tree,
                                     const std::vector<MetricKind>& catalog) {
    std::map<MetricKind, std::size_t> min_depth;
    for (const auto& node : tree.nodes) {
        if (node.is_leaf) continue;
        auto it = min_depth.find(node.split_metric);
        if (it == min_depth.end() || node.depth < it->second) min_depth[node.split_metric] = node.depth;
    }

    PriorityList list;
    std::vector<std::pair<std::size_t, std::size_t>> used;  // (depth, catalog index)
    std::vector<std::size_t> unused;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        auto it = min_depth.find(catalog[i]);
        if (it != min_depth.end()) {
            used.emplace_back(it->second, i);
        } else {
            unused.push_back(i);
        }
    }
    std::sort(used.begin(), used.end());
    for (const auto& [depth, idx] : used) {
        list.ordered.push_back({catalog[idx], static_cast<std::int32_t>(depth)});
    }
    for (std::size_t idx : unused) {
        list.ordered.push_back({catalog[idx], -1});
    }
    return list;
}

// ---------------------------------------------------------------------------
// human-readable persistence, for audit

inline void write_tree_text(const DecisionTree& tree, std::ostream& out) {
    out << "# decision tree: nested splits, `<= threshold` goes to the first child\n";
    out << "# max_depth " << tree.max_depth << "\n";
    auto emit = [&](auto&& self, std::int32_t index, std::size_t indent) -> void {
        const auto& node = tree.nodes[static_cast<std::size_t>(index)];
        const std::string pad(indent * 2, ' ');
        if (node.is_leaf) {
            out << pad << "leaf " << (node.label == SpanLabel::Abnormal ? "abnormal" : "normal")
                << " purity=" << node.purity << " normal=" << node.n_normal
                << " abnormal=" << node.n_abnormal << "\n";
            return;
        }
        std::ostringstream th;
        th.precision(12);
        th << node.threshold;
        out << pad << "split " << metric_name(node.split_metric) << " <= " << th.str()
            << " normal=" << node.n_normal << " abnormal=" << node.n_abnormal << "\n";
        self(self, node.left, indent + 1);
        self(self, node.right, indent + 1);
    };
    if (!tree.nodes.empty()) emit(emit, 0, 0);
}

inline void save_tree_text(const DecisionTree& tree, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write tree file: " + path.string());
    write_tree_text(tree, out);
}

inline void save_priority(const PriorityList& list, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write priority file: " + path.string());
    out << "# metric priority: min split depth in the prioritization tree;\n";
    out << "# `unused` metrics keep catalog order after the ranked ones\n";
    for (const auto& e : list.ordered) {
        out << metric_name(e.metric) << ' ';
        if (e.min_depth < 0) {
            out << "unused";
        } else {
            out << e.min_depth;
        }
        out << '\n';
    }
    if (!out) throw IoError("short write to " + path.string());
}

inline PriorityList load_priority(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open priority file: " + path.string());
    PriorityList list;
    std::string line;
    while (std::getline(in, line)) {
        const auto trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::istringstream row(trimmed);
        std::string name, depth_text;
        row >> name >> depth_text;
        auto metric = parse_metric(name);
        if (!metric) throw UnknownMetric("priority file lists unknown metric: " + name);
        std::int32_t depth = -1;
        if (depth_text != "unused") {
            try {
                depth = std::stoi(depth_text);
            } catch (const std::exception&) {
                throw ConfigError("bad depth in priority file: " + depth_text);
            }
        }
        list.ordered.push_back({*metric, depth});
    }
    return list;
}

}  // namespace minder
