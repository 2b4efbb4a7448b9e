#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cknn/adaptive.hpp"
#include "cknn/simulation.hpp"
#include "cknn/tuning.hpp"
#include "cknn/value.hpp"
#include "test_support.hpp"

using namespace cknn;

TEST_CASE("folds are arm-stratified and balanced") {
    SUBCASE("ten subjects, two balanced arms, five folds: one of each arm per fold") {
        std::vector<int> treatments{1, 2, 1, 2, 1, 2, 1, 2, 1, 2};
        const auto folds = make_folds(10, 5, treatments, 7);
        std::vector<std::vector<int>> per_fold(5, std::vector<int>(2, 0));
        for (int i = 0; i < 10; ++i)
            ++per_fold[static_cast<std::size_t>(folds[static_cast<std::size_t>(i)])]
                      [static_cast<std::size_t>(treatments[static_cast<std::size_t>(i)] - 1)];
        for (const auto& counts : per_fold) {
            CHECK(counts[0] == 1);
            CHECK(counts[1] == 1);
        }
    }
    SUBCASE("same seed gives the identical partition") {
        std::vector<int> treatments(60);
        for (int i = 0; i < 60; ++i) treatments[static_cast<std::size_t>(i)] = 1 + (i % 3);
        CHECK(make_folds(60, 10, treatments, 99) == make_folds(60, 10, treatments, 99));
        CHECK(make_folds(60, 10, treatments, 99) != make_folds(60, 10, treatments, 100));
    }
    SUBCASE("trial-sized arm counts stay within one of the ideal size") {
        std::vector<int> treatments;
        for (int i = 0; i < 216; ++i) treatments.push_back(1);
        for (int i = 0; i < 220; ++i) treatments.push_back(2);
        for (int i = 0; i < 211; ++i) treatments.push_back(3);
        const auto folds = make_folds(647, 10, treatments, 1);
        std::vector<std::vector<int>> per_arm(3, std::vector<int>(10, 0));
        for (int i = 0; i < 647; ++i)
            ++per_arm[static_cast<std::size_t>(treatments[static_cast<std::size_t>(i)] - 1)]
                     [static_cast<std::size_t>(folds[static_cast<std::size_t>(i)])];
        const double ideal[3] = {21.6, 22.0, 21.1};
        for (int a = 0; a < 3; ++a)
            for (int f = 0; f < 10; ++f)
                CHECK(std::abs(per_arm[static_cast<std::size_t>(a)]
                                      [static_cast<std::size_t>(f)] -
                               ideal[a]) <= 1.0);
    }
    SUBCASE("folds beyond the smallest arm count are rejected") {
        std::vector<int> treatments{1, 1, 1, 2, 2};
        CHECK_THROWS_AS(make_folds(5, 3, treatments, 1), InvalidArgumentError);
    }
}

TEST_CASE("a single-cell grid is chosen") {
    Rng rng(8);
    const TrialDataset data = testsupport::random_dataset(rng, 24, 2, 2, 0);
    TuneGrid grid;
    grid.k_values = {3};
    grid.folds = 4;
    const auto report = cross_validate(data, grid, Method::Cnn);
    CHECK(report.cells.size() == 1);
    CHECK(report.best == 0);
    CHECK(report.chosen().k == 3);
}

TEST_CASE("duplicate grid cells give identical values; ties prefer larger delta then smaller k") {
    SUBCASE("identical covariate rows make every k equivalent; the smaller k wins") {
        std::vector<double> cov(8, 1.0);  // all points coincide
        std::vector<int> tr{1, 2, 1, 2, 1, 2, 1, 2};
        std::vector<double> out{1., 2., 3., 4., 1., 2., 3., 4.};
        const TrialDataset data(cov, 8, 1, tr, out, std::vector<double>(8, 0.5), 2);
        TuneGrid grid;
        grid.k_values = {1, 2, 3};
        grid.folds = 2;
        const auto report = cross_validate(data, grid, Method::Cnn);
        for (const auto& cell : report.cells)
            CHECK(cell.pooled_value == report.cells[0].pooled_value);
        CHECK(report.chosen().k == 1);
    }
    SUBCASE("two thresholds above every score tie; the larger delta wins") {
        Rng rng(14);
        const TrialDataset data = testsupport::random_dataset(rng, 30, 2, 2, 0);
        TuneGrid grid;
        grid.k_values = {4};
        grid.delta_values = {1e8, 1e9};  // both force the constant regime
        grid.folds = 3;
        const auto report = cross_validate(data, grid, Method::Acnn);
        REQUIRE(report.cells.size() == 2);
        CHECK(report.cells[0].pooled_value == report.cells[1].pooled_value);
        CHECK(report.chosen().delta == 1e9);
    }
}

TEST_CASE("the pooled value equals an IPW recomputation over held-out assignments") {
    Rng rng(33);
    const TrialDataset data = testsupport::random_dataset(rng, 40, 3, 2, 1);
    TuneGrid grid;
    grid.k_values = {1, 4, 8};
    grid.folds = 5;
    grid.seed = 4;
    const auto report = cross_validate(data, grid, Method::Cnn);

    // rebuild the held-out assignments for the chosen k
    const auto folds = make_folds(data.n(), grid.folds, data.treatments(), grid.seed);
    std::vector<int> assignments(static_cast<std::size_t>(data.n()), 0);
    for (int f = 0; f < grid.folds; ++f) {
        std::vector<int> train_idx;
        for (int i = 0; i < data.n(); ++i)
            if (folds[static_cast<std::size_t>(i)] != f) train_idx.push_back(i);
        const TrialDataset train = data.subset(train_idx);
        const RegimeModel model = fit_cnn(train, report.chosen().k);
        for (int i = 0; i < data.n(); ++i)
            if (folds[static_cast<std::size_t>(i)] == f)
                assignments[static_cast<std::size_t>(i)] = model.predict(data.covariate_row(i));
    }
    CHECK(report.chosen().pooled_value == ipw_value(data, assignments).value);

    // chosen-cell dominance: no cell beats it
    for (const auto& cell : report.cells)
        CHECK(cell.pooled_value <= report.chosen().pooled_value);
}

TEST_CASE("cross-validation is deterministic and thread-count independent") {
    Rng rng(55);
    const TrialDataset data = testsupport::random_dataset(rng, 36, 3, 2, 1);
    TuneGrid grid;
    grid.k_values = {1, 2, 4, 8};
    grid.folds = 4;
    grid.seed = 21;
    const auto a = cross_validate(data, grid, Method::Acnn, DecidePolicy::PositiveWeightOnly, 1);
    const auto b = cross_validate(data, grid, Method::Acnn, DecidePolicy::PositiveWeightOnly, 4);
    REQUIRE(a.cells.size() == b.cells.size());
    CHECK(a.best == b.best);
    for (std::size_t c = 0; c < a.cells.size(); ++c) {
        CHECK(a.cells[c].pooled_value == b.cells[c].pooled_value);
        CHECK(a.cells[c].fold_values == b.cells[c].fold_values);
    }
}

TEST_CASE("cnn ignores the delta grid") {
    Rng rng(66);
    const TrialDataset data = testsupport::random_dataset(rng, 30, 2, 2, 0);
    TuneGrid grid;
    grid.k_values = {2, 4};
    grid.delta_values = {0.5, 1.0, 2.0};
    grid.folds = 3;
    const auto report = cross_validate(data, grid, Method::Cnn);
    CHECK(report.cells.size() == 2);  // one sentinel delta per k
    for (const auto& cell : report.cells) CHECK(cell.delta == kUnitMetricDelta);
}

TEST_CASE("default grid") {
    SUBCASE("k ladder caps at 0.9 of the training-fold size") {
        ScenarioSpec spec;
        spec.id = 1;
        spec.n_train = 50;
        const TrialDataset data = generate_trial(spec, 50, derive_seed(1, 1));
        const TuneGrid grid = default_grid(data, Method::Cnn, 10);
        CHECK(grid.k_values == std::vector<int>{1, 2, 4, 8, 16, 32, 40});
        CHECK(grid.delta_values == std::vector<double>{kUnitMetricDelta});
    }
    SUBCASE("k ladder also caps at 256") {
        ScenarioSpec spec;
        spec.id = 1;
        spec.n_train = 800;
        const TrialDataset data = generate_trial(spec, 800, derive_seed(2, 1));
        const TuneGrid grid = default_grid(data, Method::Cnn, 10);
        CHECK(grid.k_values.back() == 256);
    }
    SUBCASE("acnn delta ladder brackets the scores and keeps the sentinel") {
        ScenarioSpec spec;
        spec.id = 2;
        spec.n_train = 60;
        const TrialDataset raw = generate_trial(spec, 60, derive_seed(3, 1));
        const TuneGrid grid = default_grid(raw, Method::Acnn, 10);
        CHECK(grid.delta_values.front() > grid.delta_values[1]);  // max score + 1 first
        CHECK(grid.delta_values.back() == kUnitMetricDelta);
        CHECK(std::is_sorted(grid.delta_values.rbegin(), grid.delta_values.rend()));
        // the top delta forces the constant regime: above every score
        const auto t = covariate_importance_all(ScalingParams::fit(raw).apply(raw),
                                                static_cast<int>(std::ceil(std::sqrt(60.0))));
        CHECK(grid.delta_values.front() > *std::max_element(t.begin(), t.end()));
    }
}

TEST_CASE("a grid whose every cell is undefined raises a tuning error") {
    // two interleaved clusters; under the literal policy with k=1 the
    // prediction always disagrees with the held-out subject's own arm
    std::vector<double> cov{0.0, 10.0, 0.1, 10.1};
    std::vector<int> tr{1, 2, 1, 2};
    std::vector<double> out{-1.0, -1.0, -1.0, -1.0};
    const TrialDataset data(cov, 4, 1, tr, out, std::vector<double>(4, 0.5), 2);
    TuneGrid grid;
    grid.k_values = {1};
    grid.folds = 2;
    grid.seed = 11;
    CHECK_THROWS_AS(cross_validate(data, grid, Method::Cnn, DecidePolicy::LiteralZeroCompetes),
                    TuningError);
}

TEST_CASE("tuned adaptive pipeline runs end to end on scenario data") {
    ScenarioSpec spec;
    spec.id = 2;
    spec.n_train = 120;
    spec.n_test = 400;
    spec.seed = 5;
    auto [train, test] = generate(spec);
    TuneGrid grid = default_grid(train, Method::Acnn, 4, 17);
    grid.k_values = {2, 8, 24};
    grid.folds = 4;
    CvReport report;
    const RegimeModel model = fit_tuned(train, grid, Method::Acnn,
                                        DecidePolicy::PositiveWeightOnly, 2, &report);
    CHECK(report.best >= 0);
    const auto predicted = model.predict_rows(test.covariates(), test.n());
    const double value = empirical_test_value(test, predicted);
    CHECK(std::isfinite(value));
    CHECK(value > 1.0);  // both marginal arms sit well above 1.3
}
