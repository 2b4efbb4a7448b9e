#pragma once

#include <span>

#include "cknn/dataset.hpp"
#include "cknn/estimator.hpp"

namespace cknn {

/// Inverse-probability-weighted value of a regime on observed data.
struct ValueReport {
    double value = 0.0;
    double matched_weight = 0.0;  // sum of 1/propensity over matched subjects
    int matched_count = 0;
};

struct ComparisonReport {
    double t = 0.0;         // standardized value difference
    double variance = 0.0;  // estimated variance of sqrt(n) * (V1 - V0)
    double value1 = 0.0;
    double value0 = 0.0;
};

/// V = sum_i R_i I(A_i = d_i) / pi_i  /  sum_i I(A_i = d_i) / pi_i.
/// Throws UndefinedValueError when no subject matches the regime.
ValueReport ipw_value(const TrialDataset& data, std::span<const int> assignments);

/// Value of the constant regime d == arm (the marginal potential-outcome
/// estimate for that arm).
ValueReport ipw_value_constant(const TrialDataset& data, int arm);

/// Estimated variance of sqrt(n) * (V(d1) - V(d0)): the mean over subjects of
/// the two squared matched residual terms.
double value_diff_variance(const TrialDataset& data, std::span<const int> d1,
                           std::span<const int> d0);

/// t = sqrt(n) (V(d1) - V(d0)) / sqrt(variance). Zero variance yields t = 0
/// when the values agree and a signed infinity otherwise.
ComparisonReport compare_regimes(const TrialDataset& data, std::span<const int> d1,
                                 std::span<const int> d0);

/// Arm with the largest marginal potential-outcome estimate (ties to the
/// smallest label).
int noninformative_arm(const TrialDataset& data);

/// The same as a constant RegimeModel.
RegimeModel noninformative_regime(const TrialDataset& data,
                                  DecidePolicy policy = DecidePolicy::PositiveWeightOnly);

}  // namespace cknn
