// subordination.hpp — Bernstein-Widder measures nu_t with e^{t psi(z)} = ∫ e^{z·u} dnu_t(u)

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bpcalc/bernstein.hpp"

namespace bpcalc {

struct WidderOptions {
    double poisson_tail = 1e-12; // truncate the Poisson series when the tail drops below
    double budget = 1e-7;        // density truncation budget (stable-1/2 case)
    int panels_per_decade = 3;
    int order = 16;
    int max_poisson_terms = 400;
};

// nu_t as a finite node set; support may include the origin.
struct SubordinationMeasure {
    double t = 0.0;
    std::string base;
    std::vector<LevyNode> nodes; // mass > 0, point >= 0 (origin allowed)
    double total_mass = 0.0;
    double budget = 0.0;

    // ∫ e^{z·u} dnu_t(u) for componentwise z <= 0
    double transform(const Vector& z) const {
        double acc = 0.0;
        for (const auto& nd : nodes) acc += nd.mass * std::exp(z.dot(nd.point));
        return acc;
    }
};

// Bernstein-Widder measure for catalog psi. Supported: dirac(v0) for any
// arity (Poisson measure on k·v0) and frac_power(1/2) in one variable
// (stable-1/2 subordinator density). Everything else is rejected.
inline SubordinationMeasure widder_measure(const BernsteinFunction& psi, double t,
                                           const WidderOptions& opt = {}) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("widder_measure: t must be >= 0");
    if (!psi.catalog()) throw UnsupportedCatalog("widder_measure: psi has no catalog tag");

    SubordinationMeasure nu;
    nu.t = t;
    nu.base = psi.name();

    const int n = psi.arity();
    if (t == 0.0) {
        nu.nodes.push_back({Vector::Zero(n), 1.0});
        nu.total_mass = 1.0;
        nu.budget = 0.0;
        return nu;
    }

    if (const auto* d = std::get_if<DiracTag>(&*psi.catalog())) {
        // e^{t(e^{z·v0}-1)} = e^{-t} sum_k t^k/k! e^{z·(k v0)}
        double mass = std::exp(-t); // k = 0 term
        double cum = 0.0;
        for (int k = 0; k < opt.max_poisson_terms; ++k) {
            nu.nodes.push_back({static_cast<double>(k) * d->v0, mass});
            cum += mass;
            if (1.0 - cum < opt.poisson_tail) break;
            mass *= t / (k + 1.0);
        }
        nu.total_mass = cum;
        nu.budget = std::max(1.0 - cum, 0.0);
        return nu;
    }

    if (const auto* f = std::get_if<FracPowerTag>(&*psi.catalog())) {
        if (n != 1 || f->alpha != 0.5)
            throw UnsupportedCatalog("widder_measure: only frac_power(1/2) in one variable");
        // stable-1/2 subordinator density t/(2 sqrt(pi)) u^{-3/2} e^{-t^2/(4u)}
        const double c = t / (2.0 * std::sqrt(M_PI));
        const double eps = t * t / 144.0; // mass below eps = erfc(6) ~ 2e-17
        const double R = std::pow(4.0 * t / (std::sqrt(M_PI) * opt.budget), 2.0);
        double cum = 0.0;
        for (const auto& q : composite_log_panels(eps, R, opt.panels_per_decade, opt.order)) {
            Vector p(1);
            p[0] = q.x;
            const double m = q.w * c * std::pow(q.x, -1.5) * std::exp(-t * t / (4.0 * q.x));
            nu.nodes.push_back({p, m});
            cum += m;
        }
        nu.total_mass = cum;
        nu.budget = opt.budget;
        return nu;
    }

    throw UnsupportedCatalog("widder_measure: unsupported catalog entry " + psi.name());
}

} // namespace bpcalc
