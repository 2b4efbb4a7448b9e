#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cknn/errors.hpp"

namespace cknn {

/// Diagonal (pseudo)metric d(x,y) = sqrt(sum_j sigma2[j] * (x_j - y_j)^2).
/// A zero entry discards the corresponding covariate entirely.
struct DiagonalMetric {
    std::vector<double> sigma2;

    static DiagonalMetric unit(int p) {
        DiagonalMetric m;
        m.sigma2.assign(static_cast<std::size_t>(p), 1.0);
        return m;
    }

    int dim() const noexcept { return static_cast<int>(sigma2.size()); }

    void validate() const {
        for (double s : sigma2)
            if (!(s >= 0.0) || !std::isfinite(s))
                throw InvalidArgumentError("metric weights must be finite and >= 0");
    }

    double squared_distance(std::span<const double> x, std::span<const double> y) const {
        if (x.size() != sigma2.size() || y.size() != sigma2.size())
            throw DimensionError("metric dimension mismatch");
        double s = 0.0;
        for (std::size_t j = 0; j < sigma2.size(); ++j) {
            const double d = x[j] - y[j];
            s += sigma2[j] * d * d;
        }
        return s;
    }

    double distance(std::span<const double> x, std::span<const double> y) const {
        return std::sqrt(squared_distance(x, y));
    }
};

}  // namespace cknn
