#pragma once

#include <span>
#include <string>
#include <vector>

#include "cknn/errors.hpp"

namespace cknn {

/// Immutable randomized-trial sample: covariates, received arm, outcome and
/// the propensity of the arm actually received. Larger outcomes are better.
/// Validated on construction:
///   - n >= 1, all covariates/outcomes finite,
///   - arm labels in {1..n_arms} with every arm represented,
///   - propensities in (0, 1].
class TrialDataset {
public:
    TrialDataset(std::vector<double> covariates_row_major, int n, int p,
                 std::vector<int> treatments, std::vector<double> outcomes,
                 std::vector<double> propensities, int n_arms);

    /// Same, but propensities default to the empirical frequency of the
    /// subject's assigned arm.
    static TrialDataset with_empirical_propensities(
        std::vector<double> covariates_row_major, int n, int p,
        std::vector<int> treatments, std::vector<double> outcomes, int n_arms);

    int n() const noexcept { return n_; }
    int p() const noexcept { return p_; }
    int n_arms() const noexcept { return n_arms_; }

    const std::vector<double>& covariates() const noexcept { return covariates_; }
    std::span<const double> covariate_row(int i) const {
        return {covariates_.data() + static_cast<std::size_t>(i) * p_,
                static_cast<std::size_t>(p_)};
    }
    int treatment(int i) const { return treatments_[static_cast<std::size_t>(i)]; }
    double outcome(int i) const { return outcomes_[static_cast<std::size_t>(i)]; }
    double propensity(int i) const { return propensities_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& treatments() const noexcept { return treatments_; }
    const std::vector<double>& outcomes() const noexcept { return outcomes_; }
    const std::vector<double>& propensities() const noexcept { return propensities_; }

    /// Number of subjects per arm (index 0 holds arm 1).
    std::vector<int> arm_counts() const;

    /// Row subset (indices into this dataset); re-validates the result.
    TrialDataset subset(std::span<const int> indices) const;

    /// Same subjects with a replacement covariate matrix (n x new_p).
    TrialDataset with_covariates(std::vector<double> covariates_row_major, int new_p) const;

private:
    std::vector<double> covariates_;
    std::vector<int> treatments_;
    std::vector<double> outcomes_;
    std::vector<double> propensities_;
    int n_ = 0;
    int p_ = 0;
    int n_arms_ = 0;
};

/// Per-covariate affine map sending the training min/max to [-1, +1].
/// Out-of-range values extrapolate linearly; a constant column maps to 0.
struct ScalingParams {
    std::vector<double> min;
    std::vector<double> max;

    static ScalingParams fit(const TrialDataset& data);
    static ScalingParams fit(const std::vector<double>& covariates_row_major, int n, int p);

    /// Empty params: covariates pass through in their native scale.
    static ScalingParams identity() { return {}; }

    int dim() const noexcept { return static_cast<int>(min.size()); }
    bool is_identity() const noexcept { return min.empty(); }

    double apply_one(double x, int j) const {
        const double lo = min[static_cast<std::size_t>(j)];
        const double hi = max[static_cast<std::size_t>(j)];
        if (hi == lo) return 0.0;
        return (x - lo) * (2.0 / (hi - lo)) - 1.0;
    }
    double invert_one(double y, int j) const {
        const double lo = min[static_cast<std::size_t>(j)];
        const double hi = max[static_cast<std::size_t>(j)];
        if (hi == lo) return lo;
        return lo + (y + 1.0) * ((hi - lo) / 2.0);
    }

    void apply_row(std::span<const double> in, std::span<double> out) const;
    std::vector<double> apply_matrix(const std::vector<double>& covariates, int n) const;
    std::vector<double> invert_matrix(const std::vector<double>& scaled, int n) const;

    /// Dataset with scaled covariates (same subjects otherwise).
    TrialDataset apply(const TrialDataset& data) const;
};

/// Column-name configuration for CSV ingestion. Any column whose header is
/// not one of these names is treated as a covariate, in file order.
struct CsvSchema {
    std::string treatment = "treatment";
    std::string outcome = "outcome";
    std::string propensity = "propensity";  // optional column
};

/// Loads a UTF-8, comma-separated, headered file. Errors carry the 1-based
/// data row number. A missing propensity column defaults each subject to the
/// empirical frequency of their assigned arm.
TrialDataset load_csv(const std::string& path, const CsvSchema& schema = {});

/// Loads only covariates (columns named by the schema are ignored if present).
/// Returns row-major values; sets p.
std::vector<double> load_covariates_csv(const std::string& path, int* p_out,
                                        const CsvSchema& schema = {});

/// Writes a dataset as x1..xp,treatment,outcome,propensity with full
/// round-trip precision.
void write_csv(const TrialDataset& data, const std::string& path);

}  // namespace cknn
