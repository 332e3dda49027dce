#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <type_traits>

#include "ltcs/autodiff.hpp"
#include "ltcs/errors.hpp"

namespace ltcs {

template <typename T>
struct GradCheckReport {
    T max_rel_error = T(0);
    std::string worst_param;
    std::size_t worst_index = 0;
};

// Compares the reverse-mode gradient of every parameter against central
// finite differences (f(p+eps) - f(p-eps)) / (2 eps). The loss builder must
// be deterministic; relative error uses max(|analytic|, |numeric|, 1e-8)
// as denominator. 64-bit only: float rounding swamps the comparison.
template <typename T>
GradCheckReport<T> grad_check(const std::function<NodePtr<T>()>& build_loss,
                              ParamStore<T>& params, T eps) {
    static_assert(std::is_floating_point_v<T>);
    if constexpr (!std::is_same_v<T, double>) {
        throw ConfigError("grad_check: requires 64-bit precision");
    }
    if (!(eps >= T(1e-7) && eps <= T(1e-3))) {
        throw ConfigError("grad_check: eps must lie in [1e-7, 1e-3]");
    }

    params.zero_grads();
    auto loss = build_loss();
    backward(loss);

    GradCheckReport<T> report;
    for (auto& [name, node] : params) {
        for (std::size_t i = 0; i < node->value.size(); ++i) {
            const T saved = node->value.data[i];
            node->value.data[i] = saved + eps;
            const T f_plus = build_loss()->value.data[0];
            node->value.data[i] = saved - eps;
            const T f_minus = build_loss()->value.data[0];
            node->value.data[i] = saved;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
                throw NumericalError("grad_check: non-finite loss while perturbing " + name);
            }
            const T numeric = (f_plus - f_minus) / (T(2) * eps);
            const T analytic = node->grad.data[i];
            const T denom = std::max({std::abs(analytic), std::abs(numeric), T(1e-8)});
            const T rel = std::abs(analytic - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

}  // namespace ltcs
