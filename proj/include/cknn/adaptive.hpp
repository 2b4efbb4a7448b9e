#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "cknn/dataset.hpp"
#include "cknn/estimator.hpp"
#include "cknn/metric.hpp"

namespace cknn {

/// Per-covariate importance scores and the metric weights derived from them:
/// sigma2[j] = max(t[j] - delta, 0).
struct ImportanceReport {
    std::vector<double> t;
    double delta = 0.0;
    std::vector<double> sigma2;
    int k_used = 0;
};

/// Assignments of the single-covariate regime d^j at every training point,
/// evaluated leave-one-out, for each k in k_values (ascending). Result is
/// [k_index][subject]. Identical floats to the generic neighbor/estimate path.
std::vector<std::vector<int>> univariate_regime_assignments(
    const TrialDataset& data, int j, std::span<const int> k_values,
    DecidePolicy policy = DecidePolicy::PositiveWeightOnly);

/// Importance of covariate j: the standardized value difference between the
/// leave-one-out single-covariate regime and the non-informative regime.
/// Operates on the covariates as given; callers scale first.
double covariate_importance(const TrialDataset& data, int j, int k,
                            DecidePolicy policy = DecidePolicy::PositiveWeightOnly);

std::vector<double> covariate_importance_all(
    const TrialDataset& data, int k, DecidePolicy policy = DecidePolicy::PositiveWeightOnly,
    int threads = 1);

/// t[k_index][j] over a whole k ladder; covariate profiles are shared across
/// k, so this is much cheaper than repeated single-k calls.
std::vector<std::vector<double>> covariate_importance_matrix(
    const TrialDataset& data, std::span<const int> k_values,
    DecidePolicy policy = DecidePolicy::PositiveWeightOnly, int threads = 1);

/// sigma2[j] = (t[j] - delta)_+. Infinite scores are clamped to one past the
/// finite extremes first; delta must be finite.
DiagonalMetric build_metric(std::span<const double> t, double delta);

/// Scales the data, scores every covariate at the given k and assembles the
/// report (delta only affects the sigma2 column).
ImportanceReport importance_report(const TrialDataset& data, int k, double delta,
                                   DecidePolicy policy = DecidePolicy::PositiveWeightOnly,
                                   int threads = 1);

/// The adaptive fit: scale, score covariates, build the metric. A metric of
/// all zeros yields the constant non-informative regime.
RegimeModel fit_adaptive(const TrialDataset& data, int k, double delta,
                         DecidePolicy policy = DecidePolicy::PositiveWeightOnly,
                         int threads = 1);

/// TSV: j (1-based), t, sigma2.
void write_importance_tsv(const ImportanceReport& report, std::ostream& out);

}  // namespace cknn
