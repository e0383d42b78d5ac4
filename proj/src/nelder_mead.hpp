#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "parabolab/types.hpp"

namespace parabolab::detail {

struct NelderMeadResult {
    Vec x;
    double value = 0.0;
    int iterations = 0;
};

// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
inline NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0, double step,
                                    double ftol, int max_iter = 2000) {
    const int n = static_cast<int>(x0.size());
    std::vector<Vec> s(static_cast<std::size_t>(n + 1), x0);
    std::vector<double> fv(static_cast<std::size_t>(n + 1));
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i + 1)](i) += step;
    for (int i = 0; i <= n; ++i) fv[static_cast<std::size_t>(i)] = f(s[static_cast<std::size_t>(i)]);
    std::vector<int> order(static_cast<std::size_t>(n + 1));
    int it = 0;
    for (; it < max_iter; ++it) {
        for (int i = 0; i <= n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[static_cast<std::size_t>(a)] < fv[static_cast<std::size_t>(b)]; });
        const auto best = static_cast<std::size_t>(order.front());
        const auto worst = static_cast<std::size_t>(order.back());
        const auto second = static_cast<std::size_t>(order[static_cast<std::size_t>(n - 1)]);
        double diam = 0.0;
        for (int i = 0; i <= n; ++i) diam = std::max(diam, (s[static_cast<std::size_t>(i)] - s[best]).norm());
        if (std::abs(fv[worst] - fv[best]) <= ftol && diam < 1e-9) break;
        if (diam < 1e-14) break;
        Vec c = Vec::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (static_cast<std::size_t>(i) != worst) c += s[static_cast<std::size_t>(i)];
        c /= n;
        const Vec xr = c + (c - s[worst]);
        const double fr = f(xr);
        if (fr < fv[best]) {
            const Vec xe = c + 2.0 * (c - s[worst]);
            const double fe = f(xe);
            if (fe < fr) {
                s[worst] = xe;
                fv[worst] = fe;
            } else {
                s[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            s[worst] = xr;
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            const Vec xc = outside ? Vec(c + 0.5 * (xr - c)) : Vec(c + 0.5 * (s[worst] - c));
            const double fc = f(xc);
            if (fc < std::min(fr, fv[worst])) {
                s[worst] = xc;
                fv[worst] = fc;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (static_cast<std::size_t>(i) == best) continue;
                    s[static_cast<std::size_t>(i)] = s[best] + 0.5 * (s[static_cast<std::size_t>(i)] - s[best]);
                    fv[static_cast<std::size_t>(i)] = f(s[static_cast<std::size_t>(i)]);
                }
            }
        }
    }
    const auto bi = std::min_element(fv.begin(), fv.end()) - fv.begin();
    return {s[static_cast<std::size_t>(bi)], fv[static_cast<std::size_t>(bi)], it};
}

}  // namespace parabolab::detail
