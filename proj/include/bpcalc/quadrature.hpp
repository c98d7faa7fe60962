// quadrature.hpp — Gauss-Legendre rules and composite panels on log-spaced windows

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "bpcalc/common.hpp"

namespace bpcalc {

struct QuadNode {
    double x;
    double w;
};

// Nodes and weights of the N-point Gauss-Legendre rule on [-1, 1].
// Newton iteration on the Legendre recurrence; symmetric, deterministic.
inline std::vector<QuadNode> gauss_legendre(int order) {
    if (order < 1) throw DomainError("gauss_legendre: order must be >= 1");
    const int n = order;
    std::vector<QuadNode> rule(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev initial guess for the i-th root
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule[i] = {-x, w};
        rule[n - 1 - i] = {x, w};
    }
    return rule;
}

// Map a reference rule onto [a, b].
inline std::vector<QuadNode> scale_rule(const std::vector<QuadNode>& ref, double a, double b) {
    std::vector<QuadNode> out;
    out.reserve(ref.size());
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    for (const auto& q : ref) out.push_back({mid + half * q.x, half * q.w});
    return out;
}

// Composite Gauss-Legendre panels on [a, b] with geometrically spaced
// panel boundaries (suited to integrands with power-law behaviour near 0).
inline std::vector<QuadNode> composite_log_panels(double a, double b, int panels_per_decade,
                                                  int order) {
    if (!(a > 0.0) || !(b > a)) throw DomainError("composite_log_panels: need 0 < a < b");
    const double decades = std::log10(b / a);
    const int panels = std::max(1, static_cast<int>(std::ceil(decades * panels_per_decade)));
    const auto ref = gauss_legendre(order);
    std::vector<QuadNode> out;
    out.reserve(static_cast<std::size_t>(panels) * ref.size());
    for (int p = 0; p < panels; ++p) {
        const double lo = a * std::pow(b / a, static_cast<double>(p) / panels);
        const double hi = a * std::pow(b / a, static_cast<double>(p + 1) / panels);
        auto panel = scale_rule(ref, lo, hi);
        out.insert(out.end(), panel.begin(), panel.end());
    }
    return out;
}

// Fixed summation order so results are bit-reproducible.
inline double integrate(const std::vector<QuadNode>& rule,
                        const std::function<double(double)>& f) {
    double acc = 0.0;
    for (const auto& q : rule) acc += q.w * f(q.x);
    return acc;
}

} // namespace bpcalc
