#include <doctest.h>

#include <cmath>

#include "cknn/estimator.hpp"
#include "cknn/simulation.hpp"
#include "cknn/value.hpp"
#include "test_support.hpp"

using namespace cknn;
using testsupport::oracle_estimate;
using testsupport::oracle_neighbors;

TEST_CASE("single subject: absent arm scores zero, present arm recovers its outcome") {
    // one subject with arm 2, R=5, pi=0.5; the propensity cancels in the ratio
    const TrialDataset data({0.0}, 1, 1, {2}, {5.0}, {0.5}, 2);
    const auto est = estimate_arms(data, DiagonalMetric::unit(1), 1, std::vector<double>{0.0});
    CHECK(est.value[0] == 0.0);
    CHECK(est.weight[0] == 0.0);
    CHECK(est.value[1] == 5.0);
    CHECK(est.weight[1] == 2.0);
}

TEST_CASE("tie-free weighted mean with equal propensities") {
    // k=3 neighborhood holds two arm-1 subjects (R=1,3) and one arm-2 subject
    const TrialDataset data({0.0, 0.1, 0.2, 5.0}, 4, 1, {1, 1, 2, 2}, {1.0, 3.0, 0.0, 9.0},
                            {0.5, 0.5, 0.5, 0.5}, 2);
    const auto est = estimate_arms(data, DiagonalMetric::unit(1), 3, std::vector<double>{0.0});
    CHECK(est.value[0] == (2.0 + 6.0) / (2.0 + 2.0));
}

TEST_CASE("randomized instance with a forced boundary tie matches the literal formula") {
    Rng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 12, p = 2, k = 5;
        // binary first covariate gives recurring exact ties at the cut
        const TrialDataset data = testsupport::random_dataset(rng, n, p, 2, 1);
        const auto query = testsupport::random_query(rng, p, 1);

        const auto ns = oracle_neighbors(data.covariates(), n, p,
                                         DiagonalMetric::unit(p).sigma2, query, k);
        const auto expected = oracle_estimate(data, ns, k);
        const auto got = estimate_arms(data, DiagonalMetric::unit(p), k, query);
        for (int a = 0; a < 2; ++a) {
            CHECK(got.value[static_cast<std::size_t>(a)] ==
                  doctest::Approx(expected.value[static_cast<std::size_t>(a)]).epsilon(1e-14));
            CHECK(got.weight[static_cast<std::size_t>(a)] ==
                  doctest::Approx(expected.weight[static_cast<std::size_t>(a)]).epsilon(1e-14));
        }
    }
}

TEST_CASE("tie-averaged estimate equals the plain k-NN estimate when the cut is unique") {
    // plain rule: all k nearest at weight one (literal, summed in the same
    // canonical order: interior ascending, then the single boundary subject)
    Rng rng(777);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 25, p = 3, k = 7;
        const TrialDataset data = testsupport::random_dataset(rng, n, p, 2, 0);
        const auto query = testsupport::random_query(rng, p, 0);
        const auto ns = find_neighbors(DiagonalMetric::unit(p), data, query, k);
        if (ns.boundary.size() != 1) continue;

        ArmEstimates plain;
        plain.value.assign(2, 0.0);
        plain.weight.assign(2, 0.0);
        for (int a = 1; a <= 2; ++a) {
            double num = 0.0, den = 0.0;
            for (int i : ns.interior) {
                if (data.treatment(i) != a) continue;
                num += data.outcome(i) * (1.0 / data.propensity(i));
                den += 1.0 / data.propensity(i);
            }
            for (int i : ns.boundary) {
                if (data.treatment(i) != a) continue;
                num += data.outcome(i) * (1.0 / data.propensity(i));
                den += 1.0 / data.propensity(i);
            }
            plain.weight[static_cast<std::size_t>(a - 1)] = den;
            plain.value[static_cast<std::size_t>(a - 1)] = den > 0 ? num / den : 0.0;
        }

        const auto stone = estimate_arms_from_neighbors(data, ns, k);
        CHECK(stone.value == plain.value);  // exact equality
        CHECK(stone.weight == plain.weight);
    }
}

TEST_CASE("tie-free weights are self-normalizing") {
    Rng rng(31337);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 30, p = 2, k = 9;
        const TrialDataset data = testsupport::random_dataset(rng, n, p, 3, 0);
        const auto query = testsupport::random_query(rng, p, 0);
        const auto ns = find_neighbors(DiagonalMetric::unit(p), data, query, k);
        if (ns.boundary.size() != 1) continue;
        // the per-subject weights within each represented arm sum to 1
        std::vector<int> members(ns.interior);
        members.insert(members.end(), ns.boundary.begin(), ns.boundary.end());
        const auto est = estimate_arms_from_neighbors(data, ns, k);
        for (int a = 1; a <= 3; ++a) {
            if (!(est.weight[static_cast<std::size_t>(a - 1)] > 0)) continue;
            double total = 0.0;
            for (int i : members) {
                if (data.treatment(i) != a) continue;
                total += (1.0 / data.propensity(i)) / est.weight[static_cast<std::size_t>(a - 1)];
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("estimates stay in the convex hull of contributing outcomes") {
    Rng rng(91);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 20, p = 2;
        const TrialDataset data = testsupport::random_dataset(rng, n, p, 2, 1);
        const auto query = testsupport::random_query(rng, p, 1);
        const int k = 1 + rng.uniform_int(n);
        const auto ns = find_neighbors(DiagonalMetric::unit(p), data, query, k);
        const auto est = estimate_arms_from_neighbors(data, ns, k);
        std::vector<int> members(ns.interior);
        members.insert(members.end(), ns.boundary.begin(), ns.boundary.end());
        for (int a = 1; a <= 2; ++a) {
            if (!(est.weight[static_cast<std::size_t>(a - 1)] > 0)) continue;
            double lo = 1e300, hi = -1e300;
            for (int i : members) {
                if (data.treatment(i) != a) continue;
                lo = std::min(lo, data.outcome(i));
                hi = std::max(hi, data.outcome(i));
            }
            CHECK(est.value[static_cast<std::size_t>(a - 1)] >= lo - 1e-12);
            CHECK(est.value[static_cast<std::size_t>(a - 1)] <= hi + 1e-12);
        }
    }
}

TEST_CASE("common propensity rescaling leaves the estimates unchanged") {
    Rng rng(4242);
    const int n = 24, p = 2, k = 7;
    const TrialDataset data = testsupport::random_dataset(rng, n, p, 2, 1);
    std::vector<double> scaled_pi(data.propensities());
    for (auto& v : scaled_pi) v *= 0.5;
    const TrialDataset data2(data.covariates(), n, p, data.treatments(), data.outcomes(),
                             scaled_pi, 2);
    const auto query = testsupport::random_query(rng, p, 1);
    const auto a = estimate_arms(data, DiagonalMetric::unit(p), k, query);
    const auto b = estimate_arms(data2, DiagonalMetric::unit(p), k, query);
    for (int arm = 0; arm < 2; ++arm)
        CHECK(a.value[static_cast<std::size_t>(arm)] ==
              doctest::Approx(b.value[static_cast<std::size_t>(arm)]).epsilon(1e-12));
}

TEST_CASE("outcome shift moves every represented arm estimate by the shift") {
    Rng rng(555);
    const int n = 30, p = 2, k = 11;
    const TrialDataset data = testsupport::random_dataset(rng, n, p, 2, 1);
    std::vector<double> shifted(data.outcomes());
    for (auto& v : shifted) v += 13.25;
    const TrialDataset data2(data.covariates(), n, p, data.treatments(), shifted,
                             data.propensities(), 2);
    const auto query = testsupport::random_query(rng, p, 1);
    const auto a = estimate_arms(data, DiagonalMetric::unit(p), k, query);
    const auto b = estimate_arms(data2, DiagonalMetric::unit(p), k, query);
    for (int arm = 0; arm < 2; ++arm) {
        if (!(a.weight[static_cast<std::size_t>(arm)] > 0)) continue;
        CHECK(b.value[static_cast<std::size_t>(arm)] ==
              doctest::Approx(a.value[static_cast<std::size_t>(arm)] + 13.25).epsilon(1e-12));
    }
    if (a.weight[0] > 0 && a.weight[1] > 0) CHECK(decide(a) == decide(b));
}

TEST_CASE("decide: argmax, ties to the smallest label, zero-weight policies") {
    ArmEstimates est;
    est.value = {2.0, 1.0};
    est.weight = {1.0, 1.0};
    CHECK(decide(est) == 1);

    est.value = {1.5, 1.5};
    CHECK(decide(est) == 1);

    est.value = {0.0, -1.0};
    est.weight = {0.0, 1.0};
    CHECK(decide(est, DecidePolicy::PositiveWeightOnly) == 2);
    CHECK(decide(est, DecidePolicy::LiteralZeroCompetes) == 1);

    est.weight = {0.0, 0.0};
    CHECK_THROWS_AS(decide(est), UndefinedValueError);
}

TEST_CASE("constant model predicts its arm everywhere") {
    const RegimeModel model = RegimeModel::constant(2, 3, 4);
    CHECK(model.is_constant());
    CHECK(model.predict(std::vector<double>{1.0, 2.0, 3.0, 4.0}) == 2);
}

TEST_CASE("k = n makes the regime constant and equal to the best marginal arm") {
    Rng rng(868);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 21, p = 2;
        const TrialDataset data = testsupport::random_dataset(rng, n, p, 2, 0);
        const RegimeModel model = fit_cnn(data, n);
        const int expected = noninformative_arm(data);
        for (int probe = 0; probe < 5; ++probe)
            CHECK(model.predict(testsupport::random_query(rng, p, 0)) == expected);
    }
}

TEST_CASE("a fitted model recovers the better arm deep inside a region") {
    // scenario-1 data: arm 1 wins where 0.2 x1 + 0.5 x3 is well below 0.3
    ScenarioSpec spec;
    spec.id = 1;
    spec.n_train = 800;
    int hits = 0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        spec.seed = 9000 + static_cast<std::uint64_t>(r);
        const TrialDataset train = generate_trial(spec, spec.n_train, derive_seed(spec.seed, 1));
        const RegimeModel model = fit_cnn(train, 28);  // ~sqrt(n)
        const std::vector<double> probe{0.0, 0.0, -1.0, 0.0, 0.0};
        if (model.predict(probe) == 1) ++hits;
    }
    CHECK(hits >= 18);
}

TEST_CASE("prediction is invariant to rescaling the metric") {
    Rng rng(64);
    const int n = 40, p = 3;
    const TrialDataset data = testsupport::random_dataset(rng, n, p, 2, 1);
    const ScalingParams scaling = ScalingParams::fit(data);
    const TrialDataset scaled = scaling.apply(data);
    DiagonalMetric metric;
    metric.sigma2 = {1.0, 0.5, 2.0};
    const RegimeModel base =
        RegimeModel::cnn(scaled, scaling, metric, 9, DecidePolicy::PositiveWeightOnly);
    for (double c : {1e-6, 1.0, 1e6}) {
        DiagonalMetric rescaled;
        for (double s : metric.sigma2) rescaled.sigma2.push_back(c * s);
        const RegimeModel other =
            RegimeModel::cnn(scaled, scaling, rescaled, 9, DecidePolicy::PositiveWeightOnly);
        for (int probe = 0; probe < 25; ++probe) {
            const auto q = testsupport::random_query(rng, p, 1);
            CHECK(base.predict(q) == other.predict(q));
        }
    }
}

TEST_CASE("requesting k beyond the sample is an error, not a clamp") {
    Rng rng(11);
    const TrialDataset data = testsupport::random_dataset(rng, 10, 2, 2, 0);
    CHECK_THROWS_AS(fit_cnn(data, 11), InvalidArgumentError);
    const auto q = testsupport::random_query(rng, 2, 0);
    CHECK_THROWS_AS(estimate_arms(data, DiagonalMetric::unit(2), 10, q, 3),
                    InvalidArgumentError);
}

TEST_CASE("arm-restricted matching baseline") {
    SUBCASE("constant outcomes within an arm average to that constant") {
        const TrialDataset data({0., 1., 2., 3.}, 4, 1, {1, 1, 2, 2}, {4.0, 4.0, 1.0, 3.0},
                                {0.5, 0.5, 0.5, 0.5}, 2);
        const auto means =
            baseline_arm_matching(data, DiagonalMetric::unit(1), 2, std::vector<double>{0.0});
        CHECK(means[0] == 4.0);
        CHECK(means[1] == 2.0);
    }
    SUBCASE("k=1 with a single shared nearest point per arm agrees with the IPW estimate") {
        const TrialDataset data({0.0, 0.5}, 2, 1, {1, 2}, {2.0, 7.0}, {0.5, 0.5}, 2);
        const auto means =
            baseline_arm_matching(data, DiagonalMetric::unit(1), 1, std::vector<double>{0.0});
        const auto est =
            estimate_arms(data, DiagonalMetric::unit(1), 2, std::vector<double>{0.0});
        CHECK(means[0] == est.value[0]);
        CHECK(means[1] == est.value[1]);
    }
    SUBCASE("random instance matches a direct recomputation") {
        Rng rng(3131);
        const int n = 30, p = 2, k = 4;
        const TrialDataset data = testsupport::random_dataset(rng, n, p, 2, 0);
        const auto query = testsupport::random_query(rng, p, 0);
        const auto means = baseline_arm_matching(data, DiagonalMetric::unit(p), k, query);
        for (int a = 1; a <= 2; ++a) {
            std::vector<std::pair<double, int>> dist;
            for (int i = 0; i < n; ++i)
                if (data.treatment(i) == a)
                    dist.emplace_back(
                        testsupport::oracle_sq_dist(DiagonalMetric::unit(p).sigma2, query.data(),
                                                    data.covariates().data() + i * p, p),
                        i);
            std::sort(dist.begin(), dist.end());
            double sum = 0.0;
            for (int t = 0; t < k; ++t)
                sum += data.outcome(dist[static_cast<std::size_t>(t)].second);
            CHECK(means[static_cast<std::size_t>(a - 1)] == sum / k);
        }
    }
    SUBCASE("an arm with fewer than k subjects is an error") {
        const TrialDataset data({0., 1., 2.}, 3, 1, {1, 1, 2}, {0., 0., 0.}, {.5, .5, .5}, 2);
        CHECK_THROWS_AS(
            baseline_arm_matching(data, DiagonalMetric::unit(1), 2, std::vector<double>{0.0}),
            InvalidArgumentError);
    }
}
