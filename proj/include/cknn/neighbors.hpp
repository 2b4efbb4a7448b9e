#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cknn/dataset.hpp"
#include "cknn/metric.hpp"

namespace cknn {

/// Exact k-nearest-neighbor result with the tie set reported explicitly.
/// interior holds indices strictly inside the k-th neighbor radius, ordered by
/// (squared distance, index); boundary holds all indices exactly at the radius,
/// ordered by index. Always |interior| < k <= |interior| + |boundary|.
struct NeighborSet {
    std::vector<int> interior;
    std::vector<int> boundary;
    double radius_sq = 0.0;

    double radius() const { return std::sqrt(radius_sq); }
};

enum class SearchBackend {
    Auto,    // naive for small n or wide metrics, kd-tree otherwise
    Naive,   // exhaustive scan; the reference implementation
    KdTree,  // spatial index; reproduces the naive result bit-exactly
};

/// Exact nearest-neighbor queries against a fixed point set under a fixed
/// diagonal metric. Covariates with zero weight are dropped at construction;
/// both backends share one distance routine, so their results are identical.
/// Queries are const and safe to run concurrently.
class NeighborSearcher {
public:
    NeighborSearcher(const std::vector<double>& points_row_major, int n, int p,
                     DiagonalMetric metric, SearchBackend backend = SearchBackend::Auto);
    NeighborSearcher(const TrialDataset& data, DiagonalMetric metric,
                     SearchBackend backend = SearchBackend::Auto);
    ~NeighborSearcher();
    NeighborSearcher(NeighborSearcher&&) noexcept;
    NeighborSearcher& operator=(NeighborSearcher&&) noexcept;

    int n_points() const noexcept { return n_; }
    int dim() const noexcept { return p_; }
    const DiagonalMetric& metric() const noexcept { return metric_; }
    SearchBackend active_backend() const noexcept { return active_; }

    /// k nearest neighbors of a p-dimensional query; exclude removes one
    /// training index (leave-one-out). Throws if k exceeds the number of
    /// eligible points.
    NeighborSet find(std::span<const double> query, int k,
                     std::optional<int> exclude = std::nullopt) const;

    /// All (squared distance, index) pairs sorted ascending by (distance,
    /// index). One profile serves every k via cut().
    using Profile = std::vector<std::pair<double, int>>;
    Profile profile(std::span<const double> query,
                    std::optional<int> exclude = std::nullopt) const;
    static NeighborSet cut(const Profile& profile, int k);

private:
    struct KdTree;

    double point_sq_dist(std::span<const double> packed_query, int i) const;
    void pack_query(std::span<const double> query, std::vector<double>& out) const;
    NeighborSet find_naive(std::span<const double> packed_query, int k,
                           int exclude) const;
    NeighborSet find_kdtree(std::span<const double> packed_query, int k,
                            int exclude) const;

    int n_ = 0;
    int p_ = 0;
    DiagonalMetric metric_;
    std::vector<int> active_dims_;     // dims with sigma2 > 0, ascending
    std::vector<double> active_sigma2_;
    std::vector<double> packed_;       // n x |active| row-major
    SearchBackend active_ = SearchBackend::Naive;
    std::unique_ptr<KdTree> tree_;
};

/// One-shot convenience wrapper over NeighborSearcher.
NeighborSet find_neighbors(const DiagonalMetric& metric, const TrialDataset& data,
                           std::span<const double> query, int k,
                           std::optional<int> exclude = std::nullopt,
                           SearchBackend backend = SearchBackend::Auto);

}  // namespace cknn
