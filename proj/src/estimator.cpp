#include "cknn/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cknn {

ArmEstimates estimate_arms_from_neighbors(const TrialDataset& data,
                                          const NeighborSet& neighbors, int k) {
    const int arms = data.n_arms();
    std::vector<double> num(static_cast<std::size_t>(arms), 0.0);
    std::vector<double> den(static_cast<std::size_t>(arms), 0.0);
    std::vector<double> bnum(static_cast<std::size_t>(arms), 0.0);
    std::vector<double> bden(static_cast<std::size_t>(arms), 0.0);

    for (int i : neighbors.interior) {
        const std::size_t a = static_cast<std::size_t>(data.treatment(i) - 1);
        const double u = 1.0 / data.propensity(i);
        num[a] += data.outcome(i) * u;
        den[a] += u;
    }
    for (int i : neighbors.boundary) {
        const std::size_t a = static_cast<std::size_t>(data.treatment(i) - 1);
        const double u = 1.0 / data.propensity(i);
        bnum[a] += data.outcome(i) * u;
        bden[a] += u;
    }
    const double tie_w = static_cast<double>(k - static_cast<int>(neighbors.interior.size())) /
                         static_cast<double>(neighbors.boundary.size());

    ArmEstimates est;
    est.value.resize(static_cast<std::size_t>(arms));
    est.weight.resize(static_cast<std::size_t>(arms));
    for (int a = 0; a < arms; ++a) {
        const std::size_t s = static_cast<std::size_t>(a);
        const double w = den[s] + tie_w * bden[s];
        est.weight[s] = w;
        est.value[s] = w > 0.0 ? (num[s] + tie_w * bnum[s]) / w : 0.0;
    }
    return est;
}

ArmEstimates estimate_arms(const TrialDataset& data, const NeighborSearcher& searcher, int k,
                           std::span<const double> x, std::optional<int> exclude) {
    if (searcher.n_points() != data.n())
        throw DimensionError("searcher and dataset sizes differ");
    const NeighborSet ns = searcher.find(x, k, exclude);
    return estimate_arms_from_neighbors(data, ns, k);
}

ArmEstimates estimate_arms(const TrialDataset& data, const DiagonalMetric& metric, int k,
                           std::span<const double> x, std::optional<int> exclude) {
    NeighborSearcher searcher(data, metric);
    return estimate_arms(data, searcher, k, x, exclude);
}

int decide(const ArmEstimates& estimates, DecidePolicy policy) {
    int best = -1;
    double best_value = 0.0;
    for (int a = 0; a < estimates.arms(); ++a) {
        const std::size_t s = static_cast<std::size_t>(a);
        if (policy == DecidePolicy::PositiveWeightOnly && !(estimates.weight[s] > 0.0)) continue;
        if (best < 0 || estimates.value[s] > best_value) {
            best = a;
            best_value = estimates.value[s];
        }
    }
    if (best < 0) throw UndefinedValueError("no arm has positive weight in the neighborhood");
    return best + 1;
}

std::vector<double> baseline_arm_matching(const TrialDataset& data, const DiagonalMetric& metric,
                                          int k, std::span<const double> x) {
    if (metric.dim() != data.p()) throw DimensionError("metric dimension mismatch");
    metric.validate();
    if (k < 1) throw InvalidArgumentError("k must be >= 1");

    std::vector<double> means(static_cast<std::size_t>(data.n_arms()), 0.0);
    std::vector<std::pair<double, int>> dist;
    for (int arm = 1; arm <= data.n_arms(); ++arm) {
        dist.clear();
        for (int i = 0; i < data.n(); ++i) {
            if (data.treatment(i) != arm) continue;
            dist.emplace_back(metric.squared_distance(x, data.covariate_row(i)), i);
        }
        if (static_cast<int>(dist.size()) < k)
            throw InvalidArgumentError("arm " + std::to_string(arm) + " has fewer than k=" +
                                       std::to_string(k) + " subjects");
        std::sort(dist.begin(), dist.end());
        double sum = 0.0;
        for (int t = 0; t < k; ++t) sum += data.outcome(dist[static_cast<std::size_t>(t)].second);
        means[static_cast<std::size_t>(arm - 1)] = sum / static_cast<double>(k);
    }
    return means;
}

struct RegimeModel::Impl {
    bool constant = false;
    int arm = 0;
    int n_arms = 0;
    int p = 0;
    DecidePolicy policy = DecidePolicy::PositiveWeightOnly;

    std::optional<TrialDataset> training;
    ScalingParams scaling;
    DiagonalMetric metric;
    int k = 0;
    std::optional<NeighborSearcher> searcher;
};

RegimeModel RegimeModel::constant(int arm, int n_arms, int p, DecidePolicy policy) {
    if (arm < 1 || arm > n_arms) throw InvalidArgumentError("constant arm outside {1..L}");
    auto impl = std::make_shared<Impl>();
    impl->constant = true;
    impl->arm = arm;
    impl->n_arms = n_arms;
    impl->p = p;
    impl->policy = policy;
    return RegimeModel(std::move(impl));
}

RegimeModel RegimeModel::cnn(TrialDataset training_scaled, ScalingParams scaling,
                             DiagonalMetric metric, int k, DecidePolicy policy,
                             SearchBackend backend) {
    if (k < 1 || k > training_scaled.n())
        throw InvalidArgumentError("k=" + std::to_string(k) + " out of range for n=" +
                                   std::to_string(training_scaled.n()));
    if (!scaling.is_identity() && scaling.dim() != training_scaled.p())
        throw DimensionError("scaling dimension mismatch");
    if (metric.dim() != training_scaled.p()) throw DimensionError("metric dimension mismatch");
    auto impl = std::make_shared<Impl>();
    impl->n_arms = training_scaled.n_arms();
    impl->p = training_scaled.p();
    impl->policy = policy;
    impl->training.emplace(std::move(training_scaled));
    impl->scaling = std::move(scaling);
    impl->metric = std::move(metric);
    impl->k = k;
    impl->searcher.emplace(*impl->training, impl->metric, backend);
    return RegimeModel(std::move(impl));
}

bool RegimeModel::is_constant() const noexcept { return impl_->constant; }

int RegimeModel::constant_arm() const {
    if (!impl_->constant) throw InvalidArgumentError("model is not a constant regime");
    return impl_->arm;
}

int RegimeModel::n_arms() const noexcept { return impl_->n_arms; }
int RegimeModel::p() const noexcept { return impl_->p; }
DecidePolicy RegimeModel::policy() const noexcept { return impl_->policy; }

int RegimeModel::k() const {
    if (impl_->constant) throw InvalidArgumentError("constant regime has no k");
    return impl_->k;
}

const DiagonalMetric& RegimeModel::metric() const {
    if (impl_->constant) throw InvalidArgumentError("constant regime has no metric");
    return impl_->metric;
}

const ScalingParams& RegimeModel::scaling() const {
    if (impl_->constant) throw InvalidArgumentError("constant regime has no scaling");
    return impl_->scaling;
}

const TrialDataset& RegimeModel::training() const {
    if (impl_->constant) throw InvalidArgumentError("constant regime has no training data");
    return *impl_->training;
}

int RegimeModel::predict(std::span<const double> x_raw) const {
    if (impl_->constant) return impl_->arm;
    if (static_cast<int>(x_raw.size()) != impl_->p)
        throw DimensionError("query dimension mismatch");
    if (impl_->scaling.is_identity()) {
        const ArmEstimates est =
            estimate_arms(*impl_->training, *impl_->searcher, impl_->k, x_raw);
        return decide(est, impl_->policy);
    }
    thread_local std::vector<double> scaled;
    scaled.resize(x_raw.size());
    impl_->scaling.apply_row(x_raw, scaled);
    const ArmEstimates est =
        estimate_arms(*impl_->training, *impl_->searcher, impl_->k, scaled);
    return decide(est, impl_->policy);
}

std::vector<int> RegimeModel::predict_rows(const std::vector<double>& rows, int n) const {
    const int p = impl_->p;
    if (rows.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(p))
        throw DimensionError("row matrix size does not match n x p");
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] =
            predict({rows.data() + static_cast<std::size_t>(i) * p, static_cast<std::size_t>(p)});
    return out;
}

RegimeModel fit_cnn(const TrialDataset& data, int k, DecidePolicy policy) {
    // the plain rule measures distance on the covariates' native scale; only
    // the adaptive fit re-scales (its per-covariate weights must be comparable)
    return RegimeModel::cnn(data, ScalingParams::identity(), DiagonalMetric::unit(data.p()), k,
                            policy);
}

}  // namespace cknn
