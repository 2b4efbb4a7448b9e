#include "cknn/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "cknn/adaptive.hpp"
#include "cknn/neighbors.hpp"
#include "cknn/parallel.hpp"
#include "cknn/value.hpp"

namespace cknn {

namespace {

// IPW value over a subject subset; nullopt when no subset subject matches.
std::optional<double> ipw_value_over(const TrialDataset& data,
                                     const std::vector<int>& assignments,
                                     const std::vector<int>& indices) {
    double num = 0.0;
    double den = 0.0;
    int count = 0;
    for (int i : indices) {
        const std::size_t s = static_cast<std::size_t>(i);
        if (data.treatment(i) != assignments[s]) continue;
        const double u = 1.0 / data.propensity(i);
        num += data.outcome(i) * u;
        den += u;
        ++count;
    }
    if (count == 0) return std::nullopt;
    return num / den;
}

void validate_grid(const TuneGrid& grid, const TrialDataset& data) {
    if (grid.k_values.empty()) throw InvalidArgumentError("empty k grid");
    for (std::size_t t = 0; t < grid.k_values.size(); ++t) {
        if (grid.k_values[t] < 1) throw InvalidArgumentError("k values must be >= 1");
        if (t > 0 && grid.k_values[t] < grid.k_values[t - 1])
            throw InvalidArgumentError("k grid must be ascending");
    }
    if (grid.delta_values.empty()) throw InvalidArgumentError("empty delta grid");
    if (grid.folds < 2) throw InvalidArgumentError("folds must be >= 2");
    if (grid.folds > data.n()) throw InvalidArgumentError("folds exceed sample size");
}

}  // namespace

std::vector<int> make_folds(int n, int folds, std::span<const int> treatments,
                            std::uint64_t seed) {
    if (static_cast<int>(treatments.size()) != n)
        throw DimensionError("treatment vector length does not match n");
    if (folds < 2) throw InvalidArgumentError("folds must be >= 2");

    int max_arm = 0;
    for (int a : treatments) max_arm = std::max(max_arm, a);
    std::vector<std::vector<int>> by_arm(static_cast<std::size_t>(max_arm));
    for (int i = 0; i < n; ++i) {
        const int a = treatments[static_cast<std::size_t>(i)];
        if (a < 1) throw InvalidArgumentError("arm labels must be >= 1");
        by_arm[static_cast<std::size_t>(a - 1)].push_back(i);
    }
    for (std::size_t a = 0; a < by_arm.size(); ++a)
        if (static_cast<int>(by_arm[a].size()) < folds)
            throw InvalidArgumentError("folds=" + std::to_string(folds) + " exceed arm " +
                                       std::to_string(a + 1) + " count " +
                                       std::to_string(by_arm[a].size()));

    Rng rng(derive_seed(seed, 0xF01D5));
    std::vector<int> fold_of(static_cast<std::size_t>(n), 0);
    for (auto& members : by_arm) {
        rng.shuffle(members);
        for (std::size_t t = 0; t < members.size(); ++t)
            fold_of[static_cast<std::size_t>(members[t])] = static_cast<int>(t) % folds;
    }
    return fold_of;
}

CvReport cross_validate(const TrialDataset& data, const TuneGrid& grid, Method method,
                        DecidePolicy policy, int threads) {
    validate_grid(grid, data);

    std::vector<double> deltas;
    if (method == Method::Cnn) {
        deltas = {kUnitMetricDelta};
    } else {
        deltas = grid.delta_values;
        std::sort(deltas.begin(), deltas.end(), std::greater<double>());
    }
    const auto& ks = grid.k_values;
    const std::size_t n_cells = ks.size() * deltas.size();

    const std::vector<int> fold_of = make_folds(data.n(), grid.folds, data.treatments(),
                                                grid.seed);

    // cell order: k ascending (outer), delta descending (inner)
    CvReport report;
    report.cells.resize(n_cells);
    for (std::size_t ki = 0; ki < ks.size(); ++ki)
        for (std::size_t di = 0; di < deltas.size(); ++di) {
            CvCell& cell = report.cells[ki * deltas.size() + di];
            cell.k = ks[ki];
            cell.delta = deltas[di];
            cell.fold_values.assign(static_cast<std::size_t>(grid.folds),
                                    std::numeric_limits<double>::quiet_NaN());
        }

    std::vector<std::vector<int>> assignments(
        n_cells, std::vector<int>(static_cast<std::size_t>(data.n()), 0));
    std::vector<std::vector<int>> heldout_of_fold(static_cast<std::size_t>(grid.folds));
    for (int i = 0; i < data.n(); ++i)
        heldout_of_fold[static_cast<std::size_t>(fold_of[static_cast<std::size_t>(i)])]
            .push_back(i);

    const bool needs_loo = method == Method::Acnn;

    parallel_for(static_cast<std::size_t>(grid.folds), threads, [&](std::size_t f) {
        std::vector<int> train_idx;
        train_idx.reserve(static_cast<std::size_t>(data.n()));
        for (int i = 0; i < data.n(); ++i)
            if (fold_of[static_cast<std::size_t>(i)] != static_cast<int>(f))
                train_idx.push_back(i);
        const std::vector<int>& heldout = heldout_of_fold[f];

        const TrialDataset train = data.subset(train_idx);
        const int limit = needs_loo ? train.n() - 1 : train.n();
        if (ks.back() > limit)
            throw InvalidArgumentError("k=" + std::to_string(ks.back()) +
                                       " exceeds fold training size limit " +
                                       std::to_string(limit));

        // the plain method works on native covariates; the adaptive method
        // scales per training fold
        const ScalingParams scaling =
            method == Method::Acnn ? ScalingParams::fit(train) : ScalingParams::identity();
        const TrialDataset scaled_train =
            method == Method::Acnn ? scaling.apply(train) : train;

        std::vector<double> queries(heldout.size() * static_cast<std::size_t>(data.p()));
        for (std::size_t q = 0; q < heldout.size(); ++q) {
            const auto row = data.covariate_row(heldout[q]);
            double* dst = queries.data() + q * static_cast<std::size_t>(data.p());
            if (scaling.is_identity())
                std::copy(row.begin(), row.end(), dst);
            else
                scaling.apply_row(row, {dst, static_cast<std::size_t>(data.p())});
        }
        auto query_row = [&](std::size_t q) {
            return std::span<const double>(
                queries.data() + q * static_cast<std::size_t>(data.p()),
                static_cast<std::size_t>(data.p()));
        };

        // unit-metric cells share one distance profile per query across all k
        const NeighborSearcher unit_searcher(scaled_train, DiagonalMetric::unit(data.p()));
        for (std::size_t q = 0; q < heldout.size(); ++q) {
            const auto profile = unit_searcher.profile(query_row(q));
            for (std::size_t ki = 0; ki < ks.size(); ++ki) {
                const NeighborSet ns = NeighborSearcher::cut(profile, ks[ki]);
                const ArmEstimates est = estimate_arms_from_neighbors(train, ns, ks[ki]);
                const int arm = decide(est, policy);
                for (std::size_t di = 0; di < deltas.size(); ++di)
                    if (deltas[di] == kUnitMetricDelta)
                        assignments[ki * deltas.size() + di]
                                   [static_cast<std::size_t>(heldout[q])] = arm;
            }
        }

        if (method == Method::Acnn) {
            const auto t_matrix = covariate_importance_matrix(scaled_train, ks, policy, 1);
            for (std::size_t ki = 0; ki < ks.size(); ++ki) {
                for (std::size_t di = 0; di < deltas.size(); ++di) {
                    if (deltas[di] == kUnitMetricDelta) continue;
                    auto& cell_assign = assignments[ki * deltas.size() + di];
                    const DiagonalMetric metric = build_metric(t_matrix[ki], deltas[di]);
                    const bool all_zero = std::all_of(metric.sigma2.begin(),
                                                      metric.sigma2.end(),
                                                      [](double s) { return s == 0.0; });
                    if (all_zero) {
                        const int arm = noninformative_arm(train);
                        for (int i : heldout) cell_assign[static_cast<std::size_t>(i)] = arm;
                        continue;
                    }
                    const NeighborSearcher searcher(scaled_train, metric);
                    for (std::size_t q = 0; q < heldout.size(); ++q) {
                        const NeighborSet ns = searcher.find(query_row(q), ks[ki]);
                        const ArmEstimates est =
                            estimate_arms_from_neighbors(train, ns, ks[ki]);
                        cell_assign[static_cast<std::size_t>(heldout[q])] =
                            decide(est, policy);
                    }
                }
            }
        }
    });

    for (std::size_t c = 0; c < n_cells; ++c) {
        CvCell& cell = report.cells[c];
        try {
            cell.pooled_value = ipw_value(data, assignments[c]).value;
            cell.defined = true;
        } catch (const UndefinedValueError&) {
            cell.pooled_value = -std::numeric_limits<double>::infinity();
            cell.defined = false;
        }
        for (int f = 0; f < grid.folds; ++f) {
            const auto v = ipw_value_over(data, assignments[c],
                                          heldout_of_fold[static_cast<std::size_t>(f)]);
            if (v) cell.fold_values[static_cast<std::size_t>(f)] = *v;
        }
    }

    report.best = -1;
    for (std::size_t c = 0; c < n_cells; ++c) {
        if (!report.cells[c].defined) continue;
        if (report.best < 0) {
            report.best = static_cast<int>(c);
            continue;
        }
        const CvCell& a = report.cells[c];
        const CvCell& b = report.cells[static_cast<std::size_t>(report.best)];
        if (a.pooled_value > b.pooled_value ||
            (a.pooled_value == b.pooled_value &&
             (a.delta > b.delta || (a.delta == b.delta && a.k < b.k))))
            report.best = static_cast<int>(c);
    }
    if (report.best < 0)
        throw TuningError("every grid cell has an undefined held-out value");
    return report;
}

TuneGrid default_grid(const TrialDataset& data, Method method, int folds, std::uint64_t seed,
                      DecidePolicy policy, int threads) {
    if (data.n() < 10) throw InvalidArgumentError("default grid requires n >= 10");
    if (folds < 2) throw InvalidArgumentError("folds must be >= 2");

    TuneGrid grid;
    grid.folds = folds;
    grid.seed = seed;

    const int cap = std::min(
        static_cast<int>(std::floor(0.9 * data.n() * (folds - 1) / static_cast<double>(folds))),
        256);
    for (int k = 1; k <= cap; k *= 2) grid.k_values.push_back(k);
    if (grid.k_values.empty() || grid.k_values.back() < cap) grid.k_values.push_back(cap);

    if (method == Method::Acnn) {
        const int k_ref =
            std::clamp(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.n())))), 1,
                       data.n() - 1);
        const ScalingParams scaling = ScalingParams::fit(data);
        const TrialDataset scaled = scaling.apply(data);
        const std::vector<double> t = covariate_importance_all(scaled, k_ref, policy, threads);

        // clamp infinite sentinels to one past the finite extremes, as the
        // metric construction does
        double max_fin = -std::numeric_limits<double>::infinity();
        double min_fin = std::numeric_limits<double>::infinity();
        bool any_finite = false;
        for (double v : t)
            if (std::isfinite(v)) {
                any_finite = true;
                max_fin = std::max(max_fin, v);
                min_fin = std::min(min_fin, v);
            }
        std::vector<double> sorted(t);
        for (double& v : sorted)
            if (std::isinf(v)) v = v > 0 ? (any_finite ? max_fin + 1.0 : 1.0)
                                         : (any_finite ? min_fin - 1.0 : -1.0);
        std::sort(sorted.begin(), sorted.end());
        const auto quantile = [&](double q) {
            const double pos = q * static_cast<double>(sorted.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
            const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
            const double frac = pos - static_cast<double>(lo);
            return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
        };

        std::vector<double> deltas;
        deltas.push_back(sorted.back() + 1.0);  // forces the constant regime
        for (double q : {1.0, 0.75, 0.5, 0.25, 0.0}) deltas.push_back(quantile(q));
        // midpoints between the top order statistics: thresholds that keep
        // exactly the best 1..5 covariates
        for (std::size_t m = 1; m <= std::min<std::size_t>(5, sorted.size() - 1); ++m) {
            const double hi = sorted[sorted.size() - m];
            const double lo = sorted[sorted.size() - m - 1];
            if (hi > lo) deltas.push_back(lo + (hi - lo) / 2.0);
        }
        deltas.push_back(kUnitMetricDelta);
        std::sort(deltas.begin(), deltas.end(), std::greater<double>());
        deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());
        grid.delta_values = std::move(deltas);
    } else {
        grid.delta_values = {kUnitMetricDelta};
    }
    return grid;
}

RegimeModel fit_tuned(const TrialDataset& data, const TuneGrid& grid, Method method,
                      DecidePolicy policy, int threads, CvReport* report_out) {
    CvReport report = cross_validate(data, grid, method, policy, threads);
    const CvCell& cell = report.chosen();
    RegimeModel model =
        (method == Method::Cnn || cell.delta == kUnitMetricDelta)
            ? fit_cnn(data, cell.k, policy)
            : fit_adaptive(data, cell.k, cell.delta, policy, threads);
    if (report_out) *report_out = std::move(report);
    return model;
}

void write_cv_tsv(const CvReport& report, std::ostream& out) {
    out << "k\tdelta\tpooled_value\tdefined\tfold_values\n";
    for (std::size_t c = 0; c < report.cells.size(); ++c) {
        const CvCell& cell = report.cells[c];
        out << cell.k << "\t" << cell.delta << "\t" << cell.pooled_value << "\t"
            << (cell.defined ? 1 : 0) << "\t";
        for (std::size_t f = 0; f < cell.fold_values.size(); ++f) {
            if (f) out << ",";
            out << cell.fold_values[f];
        }
        if (static_cast<int>(c) == report.best) out << "\tchosen";
        out << "\n";
    }
}

}  // namespace cknn
