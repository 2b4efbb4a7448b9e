#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cknn/dataset.hpp"
#include "cknn/estimator.hpp"
#include "cknn/rng.hpp"

namespace cknn {

enum class Method { Cnn, Acnn };

/// Pseudo-delta meaning "unit metric" (plain k-NN, no covariate weighting).
inline constexpr double kUnitMetricDelta = -std::numeric_limits<double>::infinity();

struct TuneGrid {
    std::vector<int> k_values;       // ascending
    std::vector<double> delta_values{kUnitMetricDelta};  // descending
    int folds = 10;
    std::uint64_t seed = kDefaultSeed;
};

struct CvCell {
    int k = 0;
    double delta = kUnitMetricDelta;
    double pooled_value = 0.0;          // held-out IPW value over all subjects
    bool defined = false;
    std::vector<double> fold_values;    // per-fold held-out values (NaN if undefined)
};

struct CvReport {
    std::vector<CvCell> cells;
    int best = -1;

    const CvCell& chosen() const { return cells[static_cast<std::size_t>(best)]; }
};

/// Arm-stratified fold assignment (subject -> fold id). Within each arm the
/// fold sizes differ by at most one. Deterministic given the seed; requires
/// folds <= the smallest arm count.
std::vector<int> make_folds(int n, int folds, std::span<const int> treatments,
                            std::uint64_t seed);

/// For every (k, delta) cell: fit on 9/10 of the data, predict the held-out
/// fold, pool the held-out assignments over all folds, and score them with a
/// single IPW value on the full sample. Cnn ignores the delta grid (a lone
/// unit-metric sentinel). Ties prefer larger delta, then smaller k.
CvReport cross_validate(const TrialDataset& data, const TuneGrid& grid, Method method,
                        DecidePolicy policy = DecidePolicy::PositiveWeightOnly,
                        int threads = 1);

/// k: geometric ladder 1,2,4,... capped at min(floor(0.9 n (folds-1)/folds), 256).
/// delta (Acnn): unit-metric sentinel, quantiles {0,.25,.5,.75,1} of the
/// covariate scores at a reference k = ceil(sqrt(n)), and max score + 1.
TuneGrid default_grid(const TrialDataset& data, Method method, int folds = 10,
                      std::uint64_t seed = kDefaultSeed,
                      DecidePolicy policy = DecidePolicy::PositiveWeightOnly, int threads = 1);

/// cross_validate + final fit on the full sample at the chosen cell.
RegimeModel fit_tuned(const TrialDataset& data, const TuneGrid& grid, Method method,
                      DecidePolicy policy = DecidePolicy::PositiveWeightOnly, int threads = 1,
                      CvReport* report_out = nullptr);

/// TSV: k, delta, pooled_value, defined, per-fold values (comma-joined).
void write_cv_tsv(const CvReport& report, std::ostream& out);

}  // namespace cknn
