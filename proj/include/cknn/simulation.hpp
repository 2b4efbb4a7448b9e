#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cknn/dataset.hpp"
#include "cknn/rng.hpp"
#include "cknn/tuning.hpp"

namespace cknn {

/// Benchmark scenario description. Scenarios 1-3 are two-arm with propensity
/// 1/2; scenarios 4-5 are three-arm with propensity 1/3. Covariates: two
/// Bernoulli(0.5), the rest standard normal (pairwise covariance 0.5 across
/// the normal block in the correlated variant). Arms are assigned in exactly
/// balanced counts; outcomes are the scenario mean plus unit normal noise.
struct ScenarioSpec {
    int id = 1;             // 1..5
    int p = 5;              // >= 5
    bool correlated = false;
    int n_train = 0;
    int n_test = 0;         // 0 = default (10,000 two-arm / 30,000 three-arm)
    std::uint64_t seed = kDefaultSeed;
};

int scenario_arms(int id);
double scenario_propensity(int id);
int default_test_n(int id);

/// Mean outcome surface (uses the first five covariates).
double scenario_mean_outcome(int id, std::span<const double> x, int arm);

/// argmax over arms of the mean outcome; ties to the smallest label.
int true_regime(const ScenarioSpec& spec, std::span<const double> x);

/// Reference value of the best possible regime, from a fixed table.
double optimal_value(int id, bool correlated);

/// Monte-Carlo estimate of the same quantity (mean over draws of the best
/// arm's mean outcome); the independent check on the stored table.
double mc_optimal_value(int id, bool correlated, long draws, std::uint64_t seed);

/// One trial sample of size n.
TrialDataset generate_trial(const ScenarioSpec& spec, int n, std::uint64_t seed);

/// (train, test) pair with independent streams derived from spec.seed.
std::pair<TrialDataset, TrialDataset> generate(const ScenarioSpec& spec);

/// IPW value of predicted assignments against the observed test data.
double empirical_test_value(const TrialDataset& test, std::span<const int> predicted);

struct RunOptions {
    Method method = Method::Cnn;
    DecidePolicy policy = DecidePolicy::PositiveWeightOnly;
    int folds = 10;
    std::optional<int> fixed_k;        // skip tuning and fit at this k (Cnn only)
    std::optional<TuneGrid> grid;      // overrides the default grid
    int threads = 1;                   // replicates run in parallel
};

struct ReplicateReport {
    int replicate = 0;
    double value = 0.0;
    int k = 0;
    double delta = 0.0;     // NaN when the unit metric / fixed k was used
    bool constant_regime = false;
    double seconds = 0.0;
    std::string error;      // non-empty marks a failed replicate

    bool failed() const { return !error.empty(); }
};

struct RunSummary {
    int completed = 0;
    int failed = 0;
    double mean_value = 0.0;
    double sd_value = 0.0;
};

struct RunResult {
    std::vector<ReplicateReport> replicates;
    RunSummary summary;
};

/// Full replicate pipeline: generate, tune (unless fixed_k), fit, score on
/// the test sample. Per-replicate seeds derive from master_seed and the
/// replicate index, so results do not depend on the worker count. Failed
/// replicates are recorded, not dropped.
RunResult run_replicates(const ScenarioSpec& spec, const RunOptions& options, int reps,
                         std::uint64_t master_seed);

/// TSV row: scenario, p, correlated, method, n, reps, mean_value, sd_value, seed.
void write_summary_tsv(const ScenarioSpec& spec, Method method, int reps,
                       std::uint64_t master_seed, const RunSummary& summary,
                       std::ostream& out);

void write_replicates_tsv(const RunResult& result, std::ostream& out);

}  // namespace cknn
