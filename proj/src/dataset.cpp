#include "cknn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cknn {

namespace {

void validate(const std::vector<double>& covariates, int n, int p,
              const std::vector<int>& treatments, const std::vector<double>& outcomes,
              const std::vector<double>& propensities, int n_arms) {
    if (n < 1) throw ValidationError("dataset must contain at least one subject");
    if (p < 0) throw ValidationError("negative covariate dimension");
    if (n_arms < 2) throw ValidationError("dataset must have at least two arms");
    if (covariates.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(p))
        throw DimensionError("covariate matrix size does not match n x p");
    if (treatments.size() != static_cast<std::size_t>(n) ||
        outcomes.size() != static_cast<std::size_t>(n) ||
        propensities.size() != static_cast<std::size_t>(n))
        throw DimensionError("treatment/outcome/propensity length does not match n");

    for (std::size_t i = 0; i < covariates.size(); ++i)
        if (!std::isfinite(covariates[i]))
            throw ValidationError("non-finite covariate at row " +
                                  std::to_string(i / static_cast<std::size_t>(p) + 1));

    for (int i = 0; i < n; ++i) {
        const int a = treatments[static_cast<std::size_t>(i)];
        if (a < 1 || a > n_arms)
            throw ValidationError("arm label " + std::to_string(a) + " outside {1.." +
                                  std::to_string(n_arms) + "} at row " + std::to_string(i + 1));
        if (!std::isfinite(outcomes[static_cast<std::size_t>(i)]))
            throw ValidationError("non-finite outcome at row " + std::to_string(i + 1));
        const double pi = propensities[static_cast<std::size_t>(i)];
        if (!(pi > 0.0))
            throw ValidationError("non-positive propensity at row " + std::to_string(i + 1));
        if (pi > 1.0)
            throw ValidationError("propensity greater than one at row " + std::to_string(i + 1));
    }
    // arm representation is not enforced here: neighborhood estimates are
    // well defined with absent arms (zero weight). Ingestion and the marginal
    // value operations check representation where the math requires it.
}

}  // namespace

TrialDataset::TrialDataset(std::vector<double> covariates_row_major, int n, int p,
                           std::vector<int> treatments, std::vector<double> outcomes,
                           std::vector<double> propensities, int n_arms)
    : covariates_(std::move(covariates_row_major)),
      treatments_(std::move(treatments)),
      outcomes_(std::move(outcomes)),
      propensities_(std::move(propensities)),
      n_(n),
      p_(p),
      n_arms_(n_arms) {
    validate(covariates_, n_, p_, treatments_, outcomes_, propensities_, n_arms_);
}

TrialDataset TrialDataset::with_empirical_propensities(
    std::vector<double> covariates_row_major, int n, int p, std::vector<int> treatments,
    std::vector<double> outcomes, int n_arms) {
    std::vector<int> counts(static_cast<std::size_t>(std::max(n_arms, 1)), 0);
    for (int a : treatments) {
        if (a >= 1 && a <= n_arms) ++counts[static_cast<std::size_t>(a - 1)];
    }
    std::vector<double> propensities(treatments.size(), 0.0);
    for (std::size_t i = 0; i < treatments.size(); ++i) {
        const int a = treatments[i];
        if (a >= 1 && a <= n_arms)
            propensities[i] = static_cast<double>(counts[static_cast<std::size_t>(a - 1)]) /
                              static_cast<double>(n);
    }
    return TrialDataset(std::move(covariates_row_major), n, p, std::move(treatments),
                        std::move(outcomes), std::move(propensities), n_arms);
}

std::vector<int> TrialDataset::arm_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(n_arms_), 0);
    for (int a : treatments_) ++counts[static_cast<std::size_t>(a - 1)];
    return counts;
}

TrialDataset TrialDataset::subset(std::span<const int> indices) const {
    const int m = static_cast<int>(indices.size());
    std::vector<double> cov(static_cast<std::size_t>(m) * static_cast<std::size_t>(p_));
    std::vector<int> tr(static_cast<std::size_t>(m));
    std::vector<double> out(static_cast<std::size_t>(m));
    std::vector<double> pr(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r) {
        const int i = indices[static_cast<std::size_t>(r)];
        if (i < 0 || i >= n_) throw InvalidArgumentError("subset index out of range");
        const auto row = covariate_row(i);
        std::copy(row.begin(), row.end(),
                  cov.begin() + static_cast<std::size_t>(r) * static_cast<std::size_t>(p_));
        tr[static_cast<std::size_t>(r)] = treatments_[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(r)] = outcomes_[static_cast<std::size_t>(i)];
        pr[static_cast<std::size_t>(r)] = propensities_[static_cast<std::size_t>(i)];
    }
    return TrialDataset(std::move(cov), m, p_, std::move(tr), std::move(out), std::move(pr),
                        n_arms_);
}

TrialDataset TrialDataset::with_covariates(std::vector<double> covariates_row_major,
                                           int new_p) const {
    return TrialDataset(std::move(covariates_row_major), n_, new_p, treatments_, outcomes_,
                        propensities_, n_arms_);
}

ScalingParams ScalingParams::fit(const TrialDataset& data) {
    return fit(data.covariates(), data.n(), data.p());
}

ScalingParams ScalingParams::fit(const std::vector<double>& covariates, int n, int p) {
    if (n < 1) throw InvalidArgumentError("scaling requires at least one row");
    ScalingParams params;
    params.min.assign(static_cast<std::size_t>(p), std::numeric_limits<double>::infinity());
    params.max.assign(static_cast<std::size_t>(p), -std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
            const double x =
                covariates[static_cast<std::size_t>(i) * static_cast<std::size_t>(p) +
                           static_cast<std::size_t>(j)];
            params.min[static_cast<std::size_t>(j)] =
                std::min(params.min[static_cast<std::size_t>(j)], x);
            params.max[static_cast<std::size_t>(j)] =
                std::max(params.max[static_cast<std::size_t>(j)], x);
        }
    }
    return params;
}

void ScalingParams::apply_row(std::span<const double> in, std::span<double> out) const {
    if (static_cast<int>(in.size()) != dim() || static_cast<int>(out.size()) != dim())
        throw DimensionError("scaling dimension mismatch");
    for (int j = 0; j < dim(); ++j)
        out[static_cast<std::size_t>(j)] = apply_one(in[static_cast<std::size_t>(j)], j);
}

std::vector<double> ScalingParams::apply_matrix(const std::vector<double>& covariates,
                                                int n) const {
    const int p = dim();
    std::vector<double> out(covariates.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) {
            const std::size_t idx =
                static_cast<std::size_t>(i) * static_cast<std::size_t>(p) +
                static_cast<std::size_t>(j);
            out[idx] = apply_one(covariates[idx], j);
        }
    return out;
}

std::vector<double> ScalingParams::invert_matrix(const std::vector<double>& scaled,
                                                 int n) const {
    const int p = dim();
    std::vector<double> out(scaled.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) {
            const std::size_t idx =
                static_cast<std::size_t>(i) * static_cast<std::size_t>(p) +
                static_cast<std::size_t>(j);
            out[idx] = invert_one(scaled[idx], j);
        }
    return out;
}

TrialDataset ScalingParams::apply(const TrialDataset& data) const {
    if (dim() != data.p()) throw DimensionError("scaling dimension mismatch");
    return data.with_covariates(apply_matrix(data.covariates(), data.n()), data.p());
}

}  // namespace cknn
