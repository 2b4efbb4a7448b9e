#include "cknn/value.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cknn {

namespace {

void check_assignments(const TrialDataset& data, std::span<const int> assignments) {
    if (static_cast<int>(assignments.size()) != data.n())
        throw DimensionError("assignment vector length does not match n");
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] < 1 || assignments[i] > data.n_arms())
            throw InvalidArgumentError("assignment outside {1.." +
                                       std::to_string(data.n_arms()) + "} at index " +
                                       std::to_string(i));
}

}  // namespace

ValueReport ipw_value(const TrialDataset& data, std::span<const int> assignments) {
    check_assignments(data, assignments);
    double num = 0.0;
    double den = 0.0;
    int count = 0;
    for (int i = 0; i < data.n(); ++i) {
        if (data.treatment(i) != assignments[static_cast<std::size_t>(i)]) continue;
        const double u = 1.0 / data.propensity(i);
        num += data.outcome(i) * u;
        den += u;
        ++count;
    }
    if (count == 0)
        throw UndefinedValueError("no subject matches the regime; value is undefined");
    return ValueReport{num / den, den, count};
}

ValueReport ipw_value_constant(const TrialDataset& data, int arm) {
    if (arm < 1 || arm > data.n_arms()) throw InvalidArgumentError("arm outside {1..L}");
    std::vector<int> assignments(static_cast<std::size_t>(data.n()), arm);
    return ipw_value(data, assignments);
}

double value_diff_variance(const TrialDataset& data, std::span<const int> d1,
                           std::span<const int> d0) {
    const double v1 = ipw_value(data, d1).value;
    const double v0 = ipw_value(data, d0).value;
    double sum = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const std::size_t s = static_cast<std::size_t>(i);
        const double u = 1.0 / data.propensity(i);
        if (data.treatment(i) == d1[s]) {
            const double r = (data.outcome(i) - v1) * u;
            sum += r * r;
        }
        if (data.treatment(i) == d0[s]) {
            const double r = (data.outcome(i) - v0) * u;
            sum += r * r;
        }
    }
    return sum / static_cast<double>(data.n());
}

ComparisonReport compare_regimes(const TrialDataset& data, std::span<const int> d1,
                                 std::span<const int> d0) {
    ComparisonReport rep;
    rep.value1 = ipw_value(data, d1).value;
    rep.value0 = ipw_value(data, d0).value;
    double sum = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const std::size_t s = static_cast<std::size_t>(i);
        const double u = 1.0 / data.propensity(i);
        if (data.treatment(i) == d1[s]) {
            const double r = (data.outcome(i) - rep.value1) * u;
            sum += r * r;
        }
        if (data.treatment(i) == d0[s]) {
            const double r = (data.outcome(i) - rep.value0) * u;
            sum += r * r;
        }
    }
    rep.variance = sum / static_cast<double>(data.n());

    const double diff = rep.value1 - rep.value0;
    if (rep.variance > 0.0) {
        rep.t = std::sqrt(static_cast<double>(data.n())) * diff / std::sqrt(rep.variance);
    } else if (diff == 0.0) {
        rep.t = 0.0;
    } else {
        rep.t = diff > 0.0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
    }
    return rep;
}

int noninformative_arm(const TrialDataset& data) {
    int best = 1;
    double best_value = ipw_value_constant(data, 1).value;
    for (int arm = 2; arm <= data.n_arms(); ++arm) {
        const double v = ipw_value_constant(data, arm).value;
        if (v > best_value) {
            best = arm;
            best_value = v;
        }
    }
    return best;
}

RegimeModel noninformative_regime(const TrialDataset& data, DecidePolicy policy) {
    return RegimeModel::constant(noninformative_arm(data), data.n_arms(), data.p(), policy);
}

}  // namespace cknn
