#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "parabolab/types.hpp"

namespace parabolab::detail {

// Gauss-Legendre nodes and weights on [0, 1].
inline const std::vector<std::pair<double, double>>& gauss_unit(int q) {
    static std::map<int, std::vector<std::pair<double, double>>> table;
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    auto it = table.find(q);
    if (it != table.end()) return it->second;
    std::vector<std::pair<double, double>> out;
    for (int i = 1; i <= q; ++i) {
        double x = std::cos(kPi * (i - 0.25) / (q + 0.5));
        double dp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= q; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = q * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        out.emplace_back(0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp));
    }
    return table.emplace(q, std::move(out)).first->second;
}

}  // namespace parabolab::detail
