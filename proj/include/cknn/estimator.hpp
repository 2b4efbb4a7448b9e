#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cknn/dataset.hpp"
#include "cknn/metric.hpp"
#include "cknn/neighbors.hpp"

namespace cknn {

/// Per-arm neighborhood estimates. For each arm: the inverse-propensity
/// weighted mean outcome over the (tie-adjusted) neighborhood, and the total
/// weight behind it. Zero weight means the arm is absent from the
/// neighborhood; its value is 0 by the 0/0 = 0 convention.
struct ArmEstimates {
    std::vector<double> value;
    std::vector<double> weight;

    int arms() const noexcept { return static_cast<int>(value.size()); }
};

/// How the regime decision treats arms absent from the neighborhood.
enum class DecidePolicy {
    /// Only arms with positive weight compete in the argmax (default). With
    /// all-negative outcomes, the 0-valued absent arms would otherwise win
    /// spuriously.
    PositiveWeightOnly,
    /// Every arm competes; absent arms score 0.
    LiteralZeroCompetes,
};

/// Arm-wise IPW means over a neighborhood. Subjects tied at the k-th neighbor
/// distance enter with fractional weight (k - |interior|) / |boundary|.
/// Accumulation order is fixed (interior in listed order, then the boundary
/// block as one weighted sum) so all call paths produce identical floats.
ArmEstimates estimate_arms_from_neighbors(const TrialDataset& data,
                                          const NeighborSet& neighbors, int k);

ArmEstimates estimate_arms(const TrialDataset& data, const NeighborSearcher& searcher, int k,
                           std::span<const double> x,
                           std::optional<int> exclude = std::nullopt);

ArmEstimates estimate_arms(const TrialDataset& data, const DiagonalMetric& metric, int k,
                           std::span<const double> x,
                           std::optional<int> exclude = std::nullopt);

/// Argmax arm under the policy; ties go to the smallest arm label.
int decide(const ArmEstimates& estimates, DecidePolicy policy = DecidePolicy::PositiveWeightOnly);

/// Arm-restricted plain k-nearest-neighbor means: for each arm, the simple
/// average outcome of the k nearest subjects within that arm (ties at the cut
/// broken by index). Requires every arm to have at least k subjects.
std::vector<double> baseline_arm_matching(const TrialDataset& data, const DiagonalMetric& metric,
                                          int k, std::span<const double> x);

/// A fitted decision rule: either a k-nearest-neighbor regime over stored
/// (scaled) training data, or a constant arm. Immutable and cheap to copy;
/// predict is pure and safe to call concurrently.
class RegimeModel {
public:
    static RegimeModel constant(int arm, int n_arms, int p,
                                DecidePolicy policy = DecidePolicy::PositiveWeightOnly);

    /// training must already be in scaled coordinates; scaling maps raw
    /// queries into them.
    static RegimeModel cnn(TrialDataset training_scaled, ScalingParams scaling,
                           DiagonalMetric metric, int k, DecidePolicy policy,
                           SearchBackend backend = SearchBackend::Auto);

    bool is_constant() const noexcept;
    int constant_arm() const;
    int n_arms() const noexcept;
    int p() const noexcept;
    DecidePolicy policy() const noexcept;

    int k() const;
    const DiagonalMetric& metric() const;
    const ScalingParams& scaling() const;
    const TrialDataset& training() const;

    int predict(std::span<const double> x_raw) const;
    std::vector<int> predict_rows(const std::vector<double>& rows_row_major, int n) const;

private:
    struct Impl;
    explicit RegimeModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

/// Plain causal k-NN fit: scale covariates to [-1,1] and use the unit metric.
RegimeModel fit_cnn(const TrialDataset& data, int k,
                    DecidePolicy policy = DecidePolicy::PositiveWeightOnly);

}  // namespace cknn
