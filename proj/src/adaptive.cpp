#include "cknn/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "cknn/parallel.hpp"
#include "cknn/value.hpp"

namespace cknn {

namespace {

// Value groups of one covariate column: subjects sharing an exact value,
// ordered by value, members ordered by index.
struct ColumnGroups {
    std::vector<double> values;        // distinct values ascending
    std::vector<int> members;          // subject indices grouped by value
    std::vector<int> offsets;          // group g spans members[offsets[g]..offsets[g+1])
    std::vector<int> group_of;         // subject -> group
};

ColumnGroups group_column(const TrialDataset& data, int j) {
    const int n = data.n();
    std::vector<std::pair<double, int>> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        order[static_cast<std::size_t>(i)] = {data.covariate_row(i)[static_cast<std::size_t>(j)],
                                              i};
    std::sort(order.begin(), order.end());

    ColumnGroups g;
    g.group_of.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        if (t == 0 || order[static_cast<std::size_t>(t)].first !=
                          order[static_cast<std::size_t>(t - 1)].first) {
            g.values.push_back(order[static_cast<std::size_t>(t)].first);
            g.offsets.push_back(t);
        }
        g.members.push_back(order[static_cast<std::size_t>(t)].second);
        g.group_of[static_cast<std::size_t>(order[static_cast<std::size_t>(t)].second)] =
            static_cast<int>(g.values.size()) - 1;
    }
    g.offsets.push_back(n);
    return g;
}

// Squared 1-D gap, matching the generic distance routine bit for bit
// ((a-b)^2 equals (b-a)^2 in IEEE arithmetic).
inline double sq_gap(double a, double b) {
    const double d = a - b;
    return d * d;
}

struct ArmSums {
    std::vector<double> num;
    std::vector<double> den;
    int count = 0;

    explicit ArmSums(int arms)
        : num(static_cast<std::size_t>(arms), 0.0), den(static_cast<std::size_t>(arms), 0.0) {}

    void reset() {
        std::fill(num.begin(), num.end(), 0.0);
        std::fill(den.begin(), den.end(), 0.0);
        count = 0;
    }

    void add(const TrialDataset& data, int i) {
        const std::size_t a = static_cast<std::size_t>(data.treatment(i) - 1);
        const double u = 1.0 / data.propensity(i);
        num[a] += data.outcome(i) * u;
        den[a] += u;
        ++count;
    }
};

}  // namespace

std::vector<std::vector<int>> univariate_regime_assignments(const TrialDataset& data, int j,
                                                            std::span<const int> k_values,
                                                            DecidePolicy policy) {
    const int n = data.n();
    const int arms = data.n_arms();
    if (j < 0 || j >= data.p()) throw InvalidArgumentError("covariate index out of range");
    if (k_values.empty()) throw InvalidArgumentError("empty k ladder");
    for (std::size_t t = 0; t < k_values.size(); ++t) {
        if (k_values[t] < 1 || k_values[t] > n - 1)
            throw InvalidArgumentError("k=" + std::to_string(k_values[t]) +
                                       " out of range for leave-one-out n=" + std::to_string(n));
        if (t > 0 && k_values[t] < k_values[t - 1])
            throw InvalidArgumentError("k ladder must be ascending");
    }

    const ColumnGroups groups = group_column(data, j);
    const int n_groups = static_cast<int>(groups.values.size());

    std::vector<std::vector<int>> out(k_values.size(),
                                      std::vector<int>(static_cast<std::size_t>(n), 0));

    ArmSums running(arms);
    ArmSums block(arms);
    ArmEstimates est;
    est.value.resize(static_cast<std::size_t>(arms));
    est.weight.resize(static_cast<std::size_t>(arms));
    std::vector<int> merged;
    std::vector<int> list_a, list_b;

    for (int i = 0; i < n; ++i) {
        const double v = data.covariate_row(i)[static_cast<std::size_t>(j)];
        const int own = groups.group_of[static_cast<std::size_t>(i)];
        int left = own - 1;
        int right = own + 1;
        bool own_pending = true;

        running.reset();
        std::size_t next_k = 0;

        while (next_k < k_values.size()) {
            // next block: all pending groups at the minimal squared gap
            double gap = std::numeric_limits<double>::infinity();
            if (own_pending) gap = 0.0;
            const double gl = left >= 0
                                  ? sq_gap(v, groups.values[static_cast<std::size_t>(left)])
                                  : std::numeric_limits<double>::infinity();
            const double gr = right < n_groups
                                  ? sq_gap(groups.values[static_cast<std::size_t>(right)], v)
                                  : std::numeric_limits<double>::infinity();
            gap = std::min({gap, gl, gr});

            merged.clear();
            int n_lists = 0;
            auto add_group = [&](int g, bool skip_self) {
                list_b.clear();
                for (int t = groups.offsets[static_cast<std::size_t>(g)];
                     t < groups.offsets[static_cast<std::size_t>(g + 1)]; ++t) {
                    const int m = groups.members[static_cast<std::size_t>(t)];
                    if (skip_self && m == i) continue;
                    list_b.push_back(m);
                }
                if (list_b.empty()) return;
                ++n_lists;
                if (merged.empty()) {
                    merged = list_b;
                } else {
                    list_a = merged;
                    merged.clear();
                    std::merge(list_a.begin(), list_a.end(), list_b.begin(), list_b.end(),
                               std::back_inserter(merged));
                }
            };
            if (own_pending) {
                add_group(own, true);
                own_pending = false;
            }
            while (left >= 0 &&
                   sq_gap(v, groups.values[static_cast<std::size_t>(left)]) == gap) {
                add_group(left, false);
                --left;
            }
            while (right < n_groups &&
                   sq_gap(groups.values[static_cast<std::size_t>(right)], v) == gap) {
                add_group(right, false);
                ++right;
            }
            (void)n_lists;
            if (merged.empty()) continue;  // own group was {i} alone

            block.reset();
            for (int m : merged) block.add(data, m);

            // every k that lands inside this block uses it as the boundary set
            while (next_k < k_values.size() &&
                   k_values[next_k] <= running.count + block.count) {
                const int k = k_values[next_k];
                const double tie_w = static_cast<double>(k - running.count) /
                                     static_cast<double>(block.count);
                for (int a = 0; a < arms; ++a) {
                    const std::size_t s = static_cast<std::size_t>(a);
                    const double w = running.den[s] + tie_w * block.den[s];
                    est.weight[s] = w;
                    est.value[s] =
                        w > 0.0 ? (running.num[s] + tie_w * block.num[s]) / w : 0.0;
                }
                out[next_k][static_cast<std::size_t>(i)] = decide(est, policy);
                ++next_k;
            }

            for (int m : merged) running.add(data, m);
        }
    }
    return out;
}

double covariate_importance(const TrialDataset& data, int j, int k, DecidePolicy policy) {
    const int ks[1] = {k};
    const auto assignments = univariate_regime_assignments(data, j, ks, policy);
    const std::vector<int> baseline(static_cast<std::size_t>(data.n()),
                                    noninformative_arm(data));
    return compare_regimes(data, assignments[0], baseline).t;
}

std::vector<double> covariate_importance_all(const TrialDataset& data, int k,
                                             DecidePolicy policy, int threads) {
    const int ks[1] = {k};
    const auto matrix = covariate_importance_matrix(data, ks, policy, threads);
    return matrix[0];
}

std::vector<std::vector<double>> covariate_importance_matrix(const TrialDataset& data,
                                                             std::span<const int> k_values,
                                                             DecidePolicy policy, int threads) {
    const int p = data.p();
    const std::vector<int> baseline(static_cast<std::size_t>(data.n()),
                                    noninformative_arm(data));
    std::vector<std::vector<double>> t(k_values.size(),
                                       std::vector<double>(static_cast<std::size_t>(p), 0.0));
    parallel_for(static_cast<std::size_t>(p), threads, [&](std::size_t j) {
        const auto assignments =
            univariate_regime_assignments(data, static_cast<int>(j), k_values, policy);
        for (std::size_t ki = 0; ki < k_values.size(); ++ki)
            t[ki][j] = compare_regimes(data, assignments[ki], baseline).t;
    });
    return t;
}

DiagonalMetric build_metric(std::span<const double> t, double delta) {
    if (!std::isfinite(delta)) throw InvalidArgumentError("delta must be finite");
    double max_fin = -std::numeric_limits<double>::infinity();
    double min_fin = std::numeric_limits<double>::infinity();
    bool any_finite = false;
    for (double v : t) {
        if (std::isnan(v)) throw InvalidArgumentError("importance score is NaN");
        if (std::isfinite(v)) {
            any_finite = true;
            max_fin = std::max(max_fin, v);
            min_fin = std::min(min_fin, v);
        }
    }
    const double pos_clamp = any_finite ? max_fin + 1.0 : 1.0;
    const double neg_clamp = any_finite ? min_fin - 1.0 : -1.0;

    DiagonalMetric metric;
    metric.sigma2.reserve(t.size());
    for (double v : t) {
        if (std::isinf(v)) v = v > 0.0 ? pos_clamp : neg_clamp;
        metric.sigma2.push_back(std::max(v - delta, 0.0));
    }
    return metric;
}

ImportanceReport importance_report(const TrialDataset& data, int k, double delta,
                                   DecidePolicy policy, int threads) {
    const ScalingParams scaling = ScalingParams::fit(data);
    const TrialDataset scaled = scaling.apply(data);
    ImportanceReport report;
    report.t = covariate_importance_all(scaled, k, policy, threads);
    report.delta = delta;
    report.sigma2 = build_metric(report.t, delta).sigma2;
    report.k_used = k;
    return report;
}

RegimeModel fit_adaptive(const TrialDataset& data, int k, double delta, DecidePolicy policy,
                         int threads) {
    if (k < 1 || k > data.n() - 1)
        throw InvalidArgumentError("k=" + std::to_string(k) +
                                   " out of range for leave-one-out n=" +
                                   std::to_string(data.n()));
    ScalingParams scaling = ScalingParams::fit(data);
    TrialDataset scaled = scaling.apply(data);
    const std::vector<double> t = covariate_importance_all(scaled, k, policy, threads);
    DiagonalMetric metric = build_metric(t, delta);

    const bool all_zero =
        std::all_of(metric.sigma2.begin(), metric.sigma2.end(), [](double s) { return s == 0.0; });
    if (all_zero)
        return RegimeModel::constant(noninformative_arm(data), data.n_arms(), data.p(), policy);
    return RegimeModel::cnn(std::move(scaled), scaling, std::move(metric), k, policy);
}

void write_importance_tsv(const ImportanceReport& report, std::ostream& out) {
    out << "j\tt\tsigma2\n";
    for (std::size_t j = 0; j < report.t.size(); ++j)
        out << (j + 1) << "\t" << report.t[j] << "\t" << report.sigma2[j] << "\n";
}

}  // namespace cknn
