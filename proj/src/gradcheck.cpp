#include "cnmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cnmt/errors.hpp"

namespace cnmt {

double grad_check(const std::function<double()>& loss, std::span<double> theta, std::span<const double> analytic,
                  double step) {
    if (theta.size() != analytic.size()) {
        throw DimensionError("grad_check: " + std::to_string(theta.size()) + " parameters vs " +
                             std::to_string(analytic.size()) + " gradient entries");
    }
    auto eval = [&] {
        const double v = loss();
        if (!std::isfinite(v)) throw EvaluationError("grad_check: loss evaluated to a non-finite value");
        return v;
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + step;
        const double up = eval();
        theta[i] = saved - step;
        const double down = eval();
        theta[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace cnmt
