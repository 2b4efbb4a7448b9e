#include "cknn/neighbors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace cknn {

namespace {

// Auto backend: the index pays off for large point sets in low dimension;
// pruning degrades quickly as the active dimension grows.
constexpr int kTreeMinPoints = 512;
constexpr int kTreeMaxDims = 8;
constexpr int kLeafSize = 16;

void sort_and_split(std::vector<std::pair<double, int>>& hits, double radius_sq,
                    NeighborSet& out) {
    std::sort(hits.begin(), hits.end());
    out.radius_sq = radius_sq;
    out.interior.clear();
    out.boundary.clear();
    for (const auto& [d2, idx] : hits) {
        if (d2 < radius_sq)
            out.interior.push_back(idx);
        else
            out.boundary.push_back(idx);
    }
    // within-block pairs are (d2, idx)-sorted, so boundary is already by index
}

}  // namespace

struct NeighborSearcher::KdTree {
    struct Node {
        int left = -1;    // children; -1 marks a leaf
        int right = -1;
        int begin = 0;    // leaf range into order
        int end = 0;
        int bbox = 0;     // offset into bounds (2 * act doubles: lo..., hi...)
    };

    int act = 0;
    std::vector<Node> nodes;
    std::vector<int> order;
    std::vector<double> bounds;

    const double* lo(const Node& n) const { return bounds.data() + n.bbox; }
    const double* hi(const Node& n) const { return bounds.data() + n.bbox + act; }

    // Lower bound on the squared distance from the query to any point in the
    // node's box. Computed with the same per-dimension arithmetic as the point
    // distance, so bound <= true distance holds in floating point and pruning
    // can never drop a qualifying point.
    double min_sq_dist(const Node& n, const double* q, const double* w) const {
        const double* l = lo(n);
        const double* h = hi(n);
        double s = 0.0;
        for (int a = 0; a < act; ++a) {
            double d = 0.0;
            if (q[a] < l[a])
                d = l[a] - q[a];
            else if (q[a] > h[a])
                d = q[a] - h[a];
            s += w[a] * d * d;
        }
        return s;
    }

    int build(const std::vector<double>& packed, std::vector<int>& idx, int begin, int end,
              std::vector<double>& scratch) {
        Node node;
        node.bbox = static_cast<int>(bounds.size());
        bounds.resize(bounds.size() + 2 * static_cast<std::size_t>(act));
        double* l = bounds.data() + node.bbox;
        double* h = l + act;
        for (int a = 0; a < act; ++a) {
            l[a] = std::numeric_limits<double>::infinity();
            h[a] = -std::numeric_limits<double>::infinity();
        }
        for (int t = begin; t < end; ++t) {
            const double* pt = packed.data() +
                               static_cast<std::size_t>(idx[static_cast<std::size_t>(t)]) * act;
            for (int a = 0; a < act; ++a) {
                l[a] = std::min(l[a], pt[a]);
                h[a] = std::max(h[a], pt[a]);
            }
        }
        node.begin = begin;
        node.end = end;

        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back(node);
        if (end - begin <= kLeafSize) return node_id;

        // split the widest dimension (metric-weighted) at its median
        int dim = 0;
        double best = -1.0;
        for (int a = 0; a < act; ++a) {
            const double width = h[a] - l[a];
            const double spread = scratch[static_cast<std::size_t>(a)] * width * width;
            if (spread > best) {
                best = spread;
                dim = a;
            }
        }
        if (!(best > 0.0)) return node_id;  // all points coincide; keep as leaf

        const int mid = begin + (end - begin) / 2;
        std::nth_element(idx.begin() + begin, idx.begin() + mid, idx.begin() + end,
                         [&](int a, int b) {
                             return packed[static_cast<std::size_t>(a) * act + dim] <
                                    packed[static_cast<std::size_t>(b) * act + dim];
                         });
        const int left = build(packed, idx, begin, mid, scratch);
        const int right = build(packed, idx, mid, end, scratch);
        nodes[static_cast<std::size_t>(node_id)].left = left;
        nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

NeighborSearcher::NeighborSearcher(const std::vector<double>& points, int n, int p,
                                   DiagonalMetric metric, SearchBackend backend)
    : n_(n), p_(p), metric_(std::move(metric)) {
    if (metric_.dim() != p_) throw DimensionError("metric dimension mismatch");
    metric_.validate();
    if (points.size() != static_cast<std::size_t>(n_) * static_cast<std::size_t>(p_))
        throw DimensionError("point matrix size does not match n x p");

    for (int j = 0; j < p_; ++j)
        if (metric_.sigma2[static_cast<std::size_t>(j)] > 0.0) {
            active_dims_.push_back(j);
            active_sigma2_.push_back(metric_.sigma2[static_cast<std::size_t>(j)]);
        }
    const int act = static_cast<int>(active_dims_.size());
    packed_.resize(static_cast<std::size_t>(n_) * static_cast<std::size_t>(act));
    for (int i = 0; i < n_; ++i) {
        const double* row = points.data() + static_cast<std::size_t>(i) * p_;
        double* dst = packed_.data() + static_cast<std::size_t>(i) * act;
        for (int a = 0; a < act; ++a) dst[a] = row[active_dims_[static_cast<std::size_t>(a)]];
    }

    bool use_tree = false;
    switch (backend) {
        case SearchBackend::Naive:
            break;
        case SearchBackend::KdTree:
            use_tree = act > 0;
            break;
        case SearchBackend::Auto:
            use_tree = act > 0 && act <= kTreeMaxDims && n_ >= kTreeMinPoints;
            break;
    }
    if (use_tree) {
        tree_ = std::make_unique<KdTree>();
        tree_->act = act;
        tree_->order.resize(static_cast<std::size_t>(n_));
        std::iota(tree_->order.begin(), tree_->order.end(), 0);
        tree_->build(packed_, tree_->order, 0, n_, active_sigma2_);
        active_ = SearchBackend::KdTree;
    } else {
        active_ = SearchBackend::Naive;
    }
}

NeighborSearcher::NeighborSearcher(const TrialDataset& data, DiagonalMetric metric,
                                   SearchBackend backend)
    : NeighborSearcher(data.covariates(), data.n(), data.p(), std::move(metric), backend) {}

NeighborSearcher::~NeighborSearcher() = default;
NeighborSearcher::NeighborSearcher(NeighborSearcher&&) noexcept = default;
NeighborSearcher& NeighborSearcher::operator=(NeighborSearcher&&) noexcept = default;

double NeighborSearcher::point_sq_dist(std::span<const double> q, int i) const {
    const int act = static_cast<int>(active_dims_.size());
    const double* pt = packed_.data() + static_cast<std::size_t>(i) * act;
    double s = 0.0;
    for (int a = 0; a < act; ++a) {
        const double d = q[static_cast<std::size_t>(a)] - pt[a];
        s += active_sigma2_[static_cast<std::size_t>(a)] * d * d;
    }
    return s;
}

void NeighborSearcher::pack_query(std::span<const double> query,
                                  std::vector<double>& out) const {
    if (static_cast<int>(query.size()) != p_) throw DimensionError("query dimension mismatch");
    out.resize(active_dims_.size());
    for (std::size_t a = 0; a < active_dims_.size(); ++a)
        out[a] = query[static_cast<std::size_t>(active_dims_[a])];
}

NeighborSet NeighborSearcher::find(std::span<const double> query, int k,
                                   std::optional<int> exclude) const {
    const int excl = exclude.value_or(-1);
    if (excl >= n_) throw InvalidArgumentError("exclude index out of range");
    const int effective = n_ - (excl >= 0 ? 1 : 0);
    if (k < 1 || k > effective)
        throw InvalidArgumentError("k=" + std::to_string(k) +
                                   " out of range for effective n=" + std::to_string(effective));

    thread_local std::vector<double> packed_query;
    pack_query(query, packed_query);
    if (tree_) return find_kdtree(packed_query, k, excl);
    return find_naive(packed_query, k, excl);
}

NeighborSet NeighborSearcher::find_naive(std::span<const double> q, int k, int excl) const {
    thread_local std::vector<std::pair<double, int>> dist;
    dist.clear();
    dist.reserve(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
        if (i == excl) continue;
        dist.emplace_back(point_sq_dist(q, i), i);
    }
    auto cut = dist.begin() + (k - 1);
    std::nth_element(dist.begin(), cut, dist.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const double radius_sq = cut->first;

    thread_local std::vector<std::pair<double, int>> hits;
    hits.clear();
    for (const auto& e : dist)
        if (e.first <= radius_sq) hits.push_back(e);

    NeighborSet out;
    sort_and_split(hits, radius_sq, out);
    return out;
}

NeighborSet NeighborSearcher::find_kdtree(std::span<const double> q, int k, int excl) const {
    const KdTree& tree = *tree_;
    const double* qp = q.data();
    const double* w = active_sigma2_.data();

    // pass 1: the k-th smallest squared distance
    thread_local std::priority_queue<double> heap;
    while (!heap.empty()) heap.pop();
    const std::size_t want = static_cast<std::size_t>(k);

    thread_local std::vector<int> stack;
    stack.clear();
    stack.push_back(0);
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (heap.size() == want && tree.min_sq_dist(node, qp, w) > heap.top()) continue;
        if (node.left < 0) {
            for (int t = node.begin; t < node.end; ++t) {
                const int i = tree.order[static_cast<std::size_t>(t)];
                if (i == excl) continue;
                const double d2 = point_sq_dist(q, i);
                if (heap.size() < want) {
                    heap.push(d2);
                } else if (d2 < heap.top()) {
                    heap.pop();
                    heap.push(d2);
                }
            }
        } else {
            // nearer child first so the radius shrinks quickly
            const auto& ln = tree.nodes[static_cast<std::size_t>(node.left)];
            const auto& rn = tree.nodes[static_cast<std::size_t>(node.right)];
            const double dl = tree.min_sq_dist(ln, qp, w);
            const double dr = tree.min_sq_dist(rn, qp, w);
            if (dl <= dr) {
                stack.push_back(node.right);
                stack.push_back(node.left);
            } else {
                stack.push_back(node.left);
                stack.push_back(node.right);
            }
        }
    }
    const double radius_sq = heap.top();

    // pass 2: collect everything with d2 <= radius_sq
    thread_local std::vector<std::pair<double, int>> hits;
    hits.clear();
    stack.clear();
    stack.push_back(0);
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (tree.min_sq_dist(node, qp, w) > radius_sq) continue;
        if (node.left < 0) {
            for (int t = node.begin; t < node.end; ++t) {
                const int i = tree.order[static_cast<std::size_t>(t)];
                if (i == excl) continue;
                const double d2 = point_sq_dist(q, i);
                if (d2 <= radius_sq) hits.emplace_back(d2, i);
            }
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }

    NeighborSet out;
    sort_and_split(hits, radius_sq, out);
    return out;
}

NeighborSearcher::Profile NeighborSearcher::profile(std::span<const double> query,
                                                    std::optional<int> exclude) const {
    const int excl = exclude.value_or(-1);
    if (excl >= n_) throw InvalidArgumentError("exclude index out of range");
    thread_local std::vector<double> packed_query;
    pack_query(query, packed_query);
    Profile out;
    out.reserve(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
        if (i == excl) continue;
        out.emplace_back(point_sq_dist(packed_query, i), i);
    }
    std::sort(out.begin(), out.end());
    return out;
}

NeighborSet NeighborSearcher::cut(const Profile& profile, int k) {
    if (k < 1 || k > static_cast<int>(profile.size()))
        throw InvalidArgumentError("k=" + std::to_string(k) + " out of range for effective n=" +
                                   std::to_string(profile.size()));
    NeighborSet out;
    out.radius_sq = profile[static_cast<std::size_t>(k - 1)].first;
    for (const auto& [d2, idx] : profile) {
        if (d2 < out.radius_sq)
            out.interior.push_back(idx);
        else if (d2 == out.radius_sq)
            out.boundary.push_back(idx);
        else
            break;
    }
    return out;
}

NeighborSet find_neighbors(const DiagonalMetric& metric, const TrialDataset& data,
                           std::span<const double> query, int k, std::optional<int> exclude,
                           SearchBackend backend) {
    NeighborSearcher searcher(data, metric, backend);
    return searcher.find(query, k, exclude);
}

}  // namespace cknn
