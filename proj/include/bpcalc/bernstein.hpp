// bernstein.hpp — nonpositive Bernstein functions of n variables as Levy triplets
//
// A function in the cone T_n is represented by (c0, c1, mu) with mu a finite
// node set on R_+^n \ {0}:  psi(s) = c0 + c1·s + sum_k m_k (e^{s·v_k} - 1).
// Catalog entries (dirac, frac_power, log_resolvent and nonnegative
// combinations) additionally carry closed forms used as oracles.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bpcalc/common.hpp"
#include "bpcalc/quadrature.hpp"

namespace bpcalc {

using Vector = Eigen::VectorXd;

struct LevyNode {
    Vector point; // in R_+^n \ {0}
    double mass;  // > 0
};

// Discretization options for density-backed catalog measures. The truncation
// window [eps, R] is derived from `budget` (target bound on the closed-form
// evaluation error) and `s_max` (largest |s|_inf the measure is built for).
struct MeasureOptions {
    double budget = 1e-7;
    double s_max = 10.0;
    int panels_per_decade = 3;
    int order = 16;
};

struct LevyMeasure {
    int arity = 0;
    std::vector<LevyNode> nodes;
    // Recorded bound on |finite sum - true integral| for the generating
    // closed form over the declared s-domain; 0 for purely atomic measures.
    double budget = 0.0;
    // |s|_inf the window was derived for (0 for atomic measures).
    double s_max = 0.0;

    // Diagnostic: sum m·min(1, |v|_1), finite by construction.
    double sigma_min1() const {
        double acc = 0.0;
        for (const auto& nd : nodes) acc += nd.mass * std::min(1.0, nd.point.lpNorm<1>());
        return acc;
    }

    void check(int expected_arity) const {
        if (arity != expected_arity) throw ArityMismatch("LevyMeasure: arity mismatch");
        for (const auto& nd : nodes) {
            if (nd.point.size() != arity) throw ArityMismatch("LevyMeasure: node arity mismatch");
            if (!(nd.mass > 0.0) || !std::isfinite(nd.mass))
                throw InvariantViolation("LevyMeasure: node mass must be positive and finite");
            bool some_positive = false;
            for (int j = 0; j < arity; ++j) {
                double x = nd.point[j];
                if (!std::isfinite(x) || x < 0.0)
                    throw InvariantViolation("LevyMeasure: node point outside R_+^n");
                some_positive = some_positive || x > 0.0;
            }
            if (!some_positive) throw InvariantViolation("LevyMeasure: node point is the origin");
        }
    }
};

// ---------------------------------------------------------------------------
// Catalog tags

struct DiracTag {
    Vector v0;
};
struct FracPowerTag {
    double alpha;
    int coord;
};
struct LogResolventTag {
    double lambda;
    int coord;
};
struct CatalogTag;
struct CombinationTag {
    std::vector<std::pair<double, CatalogTag>> terms; // coef >= 0
};
struct CatalogTag : std::variant<DiracTag, FracPowerTag, LogResolventTag, CombinationTag> {
    using variant::variant;
};

inline std::string catalog_name(const CatalogTag& tag) {
    struct V {
        std::string operator()(const DiracTag& t) const {
            std::ostringstream os;
            os << "dirac([";
            for (int i = 0; i < t.v0.size(); ++i) os << (i ? "," : "") << t.v0[i];
            os << "])";
            return os.str();
        }
        std::string operator()(const FracPowerTag& t) const {
            std::ostringstream os;
            os << "frac_power(" << t.alpha << ",s" << t.coord << ")";
            return os.str();
        }
        std::string operator()(const LogResolventTag& t) const {
            std::ostringstream os;
            os << "log_resolvent(" << t.lambda << ",s" << t.coord << ")";
            return os.str();
        }
        std::string operator()(const CombinationTag& t) const {
            std::ostringstream os;
            os << "combination(";
            for (std::size_t i = 0; i < t.terms.size(); ++i)
                os << (i ? " + " : "") << t.terms[i].first << "*"
                   << catalog_name(t.terms[i].second);
            os << ")";
            return os.str();
        }
    };
    return std::visit(V{}, tag);
}

// Closed-form value of a catalog entry at s in (-inf, 0]^n.
inline double catalog_closed_form(const CatalogTag& tag, const Vector& s) {
    struct V {
        const Vector& s;
        double operator()(const DiracTag& t) const { return std::expm1(s.dot(t.v0)); }
        double operator()(const FracPowerTag& t) const {
            return -std::pow(-s[t.coord], t.alpha);
        }
        double operator()(const LogResolventTag& t) const {
            return std::log(t.lambda) - std::log(t.lambda - s[t.coord]);
        }
        double operator()(const CombinationTag& t) const {
            double acc = 0.0;
            for (const auto& [coef, sub] : t.terms) acc += coef * catalog_closed_form(sub, s);
            return acc;
        }
    };
    return std::visit(V{s}, tag);
}

// ---------------------------------------------------------------------------
// BernsteinFunction

class BernsteinFunction {
public:
    BernsteinFunction(int arity, double c0, Vector c1, LevyMeasure measure,
                      std::optional<CatalogTag> tag = std::nullopt,
                      std::vector<bool> moment1_infinite = {},
                      std::vector<bool> moment2_infinite = {})
        : arity_(arity),
          c0_(c0),
          c1_(std::move(c1)),
          measure_(std::move(measure)),
          tag_(std::move(tag)),
          m1_inf_(std::move(moment1_infinite)),
          m2_inf_(std::move(moment2_infinite)) {
        if (arity_ < 1) throw InvariantViolation("BernsteinFunction: arity must be positive");
        if (!(c0_ <= 0.0)) throw InvariantViolation("BernsteinFunction: c0 must be nonpositive");
        if (c1_.size() != arity_) throw ArityMismatch("BernsteinFunction: c1 arity mismatch");
        for (int j = 0; j < arity_; ++j)
            if (!(c1_[j] >= 0.0)) throw InvariantViolation("BernsteinFunction: c1 must be >= 0");
        measure_.check(arity_);
        if (m1_inf_.empty()) m1_inf_.assign(arity_, false);
        if (m2_inf_.empty()) m2_inf_.assign(arity_, false);
    }

    int arity() const { return arity_; }
    double c0() const { return c0_; }
    const Vector& c1() const { return c1_; }
    const LevyMeasure& measure() const { return measure_; }
    const std::optional<CatalogTag>& catalog() const { return tag_; }
    double budget() const { return measure_.budget; }
    bool moment1_infinite(int i) const { return m1_inf_.at(i); }
    bool moment2_infinite(int i) const { return m2_inf_.at(i); }

    std::string name() const { return tag_ ? catalog_name(*tag_) : "custom"; }

    // psi(s) for componentwise s <= 0 (s = -0 is the plain zero vector).
    double eval(const Vector& s) const {
        check_arg(s);
        double acc = c0_ + c1_.dot(s);
        for (const auto& nd : measure_.nodes) acc += nd.mass * std::expm1(s.dot(nd.point));
        return acc;
    }

    // d psi / d s_i at s <= 0; equals omega_i at s = -0.
    double partial_deriv(int i, const Vector& s) const {
        check_index(i);
        check_arg(s);
        if (m1_inf_[i])
            throw MomentInfinite("partial_deriv: first moment infinite in coordinate " +
                                 std::to_string(i));
        double acc = c1_[i];
        for (const auto& nd : measure_.nodes)
            acc += nd.mass * nd.point[i] * std::exp(s.dot(nd.point));
        return acc;
    }

    double second_partial(int i, const Vector& s) const {
        check_index(i);
        check_arg(s);
        if (m2_inf_[i])
            throw MomentInfinite("second_partial: second moment infinite in coordinate " +
                                 std::to_string(i));
        double acc = 0.0;
        for (const auto& nd : measure_.nodes)
            acc += nd.mass * nd.point[i] * nd.point[i] * std::exp(s.dot(nd.point));
        return acc;
    }

    // omega_i = d psi / d s_i |_{s=-0}
    double omega(int i) const { return partial_deriv(i, Vector::Zero(arity_)); }

    std::optional<double> closed_form(const Vector& s) const {
        if (!tag_) return std::nullopt;
        check_arg(s);
        return catalog_closed_form(*tag_, s);
    }

    // --- catalog constructors ---

    static BernsteinFunction dirac(const Vector& v0) {
        LevyMeasure mu;
        mu.arity = static_cast<int>(v0.size());
        mu.nodes.push_back({v0, 1.0});
        mu.budget = 0.0;
        return BernsteinFunction(mu.arity, 0.0, Vector::Zero(mu.arity), std::move(mu),
                                 CatalogTag(DiracTag{v0}));
    }

    // psi(s) = -(-s_coord)^alpha, alpha in (0,1); Levy density
    // alpha/Gamma(1-alpha) u^{-1-alpha} on the coordinate axis.
    static BernsteinFunction frac_power(double alpha, int coord, int arity,
                                        const MeasureOptions& opt = {}) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw DomainError("frac_power: alpha must lie in (0,1)");
        if (coord < 0 || coord >= arity) throw DomainError("frac_power: bad coordinate");
        const double c = alpha / std::tgamma(1.0 - alpha);
        // near-zero cut: |e^{su}-1| <= s_max u  =>  error <= c s_max eps^{1-alpha}/(1-alpha);
        // each side gets budget/4 so the declared budget carries 2x headroom
        const double eps =
            std::pow((1.0 - alpha) * opt.budget / (4.0 * c * opt.s_max), 1.0 / (1.0 - alpha));
        // tail: |e^{su}-1| <= 1  =>  error <= (c/alpha) R^{-alpha}
        const double R = std::pow(4.0 * c / (alpha * opt.budget), 1.0 / alpha);
        LevyMeasure mu;
        mu.arity = arity;
        mu.budget = opt.budget;
        mu.s_max = opt.s_max;
        for (const auto& q : composite_log_panels(eps, R, opt.panels_per_decade, opt.order)) {
            Vector p = Vector::Zero(arity);
            p[coord] = q.x;
            mu.nodes.push_back({p, q.w * c * std::pow(q.x, -1.0 - alpha)});
        }
        std::vector<bool> m1(arity, false), m2(arity, false);
        m1[coord] = true; // int u · u^{-1-alpha} du diverges at infinity
        m2[coord] = true;
        return BernsteinFunction(arity, 0.0, Vector::Zero(arity), std::move(mu),
                                 CatalogTag(FracPowerTag{alpha, coord}), m1, m2);
    }

    // psi(s) = log(lambda) - log(lambda - s_coord); Levy density u^{-1} e^{-lambda u}.
    static BernsteinFunction log_resolvent(double lambda, int coord, int arity,
                                           const MeasureOptions& opt = {}) {
        if (!(lambda > 0.0)) throw DomainError("log_resolvent: lambda must be positive");
        if (coord < 0 || coord >= arity) throw DomainError("log_resolvent: bad coordinate");
        const double eps = opt.budget / (4.0 * opt.s_max);
        // tail error e^{-lambda R}/(lambda R) = budget/4; solve for z = lambda R
        double z = 30.0;
        for (int k = 0; k < 8; ++k) z = std::log(4.0 / (opt.budget * z));
        const double R = std::max(z, 1.0) / lambda;
        LevyMeasure mu;
        mu.arity = arity;
        mu.budget = opt.budget;
        mu.s_max = opt.s_max;
        for (const auto& q : composite_log_panels(eps, R, opt.panels_per_decade, opt.order)) {
            Vector p = Vector::Zero(arity);
            p[coord] = q.x;
            mu.nodes.push_back({p, q.w * std::exp(-lambda * q.x) / q.x});
        }
        return BernsteinFunction(arity, 0.0, Vector::Zero(arity), std::move(mu),
                                 CatalogTag(LogResolventTag{lambda, coord}));
    }

    // Nonnegative combination sum_k coef_k psi_k (T_n is a cone).
    static BernsteinFunction combination(
        const std::vector<std::pair<double, BernsteinFunction>>& terms) {
        if (terms.empty()) throw InvariantViolation("combination: no terms");
        const int arity = terms.front().second.arity();
        LevyMeasure mu;
        mu.arity = arity;
        double c0 = 0.0;
        Vector c1 = Vector::Zero(arity);
        std::vector<bool> m1(arity, false), m2(arity, false);
        std::vector<std::pair<double, CatalogTag>> tags;
        bool tagged = true;
        for (const auto& [coef, f] : terms) {
            if (!(coef >= 0.0)) throw InvariantViolation("combination: coefficients must be >= 0");
            if (f.arity() != arity) throw ArityMismatch("combination: arity mismatch");
            if (coef == 0.0) continue;
            c0 += coef * f.c0();
            c1 += coef * f.c1();
            mu.budget += coef * f.measure().budget;
            mu.s_max = std::max(mu.s_max, f.measure().s_max);
            for (const auto& nd : f.measure().nodes) mu.nodes.push_back({nd.point, coef * nd.mass});
            for (int j = 0; j < arity; ++j) {
                if (f.moment1_infinite(j)) m1[j] = true;
                if (f.moment2_infinite(j)) m2[j] = true;
            }
            if (f.catalog())
                tags.emplace_back(coef, *f.catalog());
            else
                tagged = false;
        }
        std::optional<CatalogTag> tag;
        if (tagged) tag = CatalogTag(CombinationTag{std::move(tags)});
        return BernsteinFunction(arity, c0, std::move(c1), std::move(mu), std::move(tag), m1, m2);
    }

    // Raw triplet without a catalog tag (no closed-form oracle).
    static BernsteinFunction from_atoms(int arity, std::vector<LevyNode> atoms, double c0 = 0.0,
                                        Vector c1 = Vector()) {
        LevyMeasure mu;
        mu.arity = arity;
        mu.nodes = std::move(atoms);
        if (c1.size() == 0) c1 = Vector::Zero(arity);
        return BernsteinFunction(arity, c0, std::move(c1), std::move(mu));
    }

private:
    void check_arg(const Vector& s) const {
        if (s.size() != arity_) throw ArityMismatch("BernsteinFunction: argument arity mismatch");
        for (int j = 0; j < arity_; ++j) {
            if (!std::isfinite(s[j])) throw DomainError("BernsteinFunction: non-finite argument");
            if (s[j] > 0.0) throw DomainError("BernsteinFunction: argument must be <= 0");
        }
    }
    void check_index(int i) const {
        if (i < 0 || i >= arity_) throw DomainError("BernsteinFunction: coordinate out of range");
    }

    int arity_;
    double c0_;
    Vector c1_;
    LevyMeasure measure_;
    std::optional<CatalogTag> tag_;
    std::vector<bool> m1_inf_, m2_inf_;
};

// ---------------------------------------------------------------------------
// Divided difference (pushforward measure construction)
//
// phi_i(s, s_{n+1}) = (psi(s) - psi(s with s_i -> s_{n+1}))/(s_i - s_{n+1}) - omega_i
// is an arity-(n+1) Bernstein function whose measure mu_i is the image of
// (1/2) dmu(v) dw, w in [-v_i, v_i], under u_j = v_j (j != i),
// u_i = (v_i + w)/2, u_{n+1} = (v_i - w)/2.

struct DividedDifference {
    int index = 0;
    double omega = 0.0;
    BernsteinFunction phi;

    // phi_i at extended argument (s_1,...,s_n,s_{n+1})
    double eval(const Vector& s_ext) const { return phi.eval(s_ext); }
};

inline DividedDifference divided_difference(const BernsteinFunction& psi, int i,
                                            int w_order = 32) {
    const int n = psi.arity();
    if (i < 0 || i >= n) throw DomainError("divided_difference: coordinate out of range");
    const double omega_i = psi.omega(i); // throws MomentInfinite when flagged

    const auto ref = gauss_legendre(w_order);
    LevyMeasure mu;
    mu.arity = n + 1;
    mu.budget = psi.measure().budget;
    mu.s_max = psi.measure().s_max;
    for (const auto& nd : psi.measure().nodes) {
        const double vi = nd.point[i];
        if (vi <= 0.0) continue; // empty w-interval, zero contribution
        for (const auto& q : ref) {
            const double w = vi * q.x;      // w in (-v_i, v_i)
            const double weight = vi * q.w; // interval half-length scaling
            Vector u(n + 1);
            for (int j = 0; j < n; ++j) u[j] = nd.point[j];
            u[i] = 0.5 * (vi + w);
            u[n] = 0.5 * (vi - w);
            mu.nodes.push_back({u, 0.5 * nd.mass * weight});
        }
    }
    BernsteinFunction phi(n + 1, 0.0, Vector::Zero(n + 1), std::move(mu));
    return DividedDifference{i, omega_i, std::move(phi)};
}

// ---------------------------------------------------------------------------
// Grid validation (absolute-monotonicity proxy)

struct GridSpec {
    double lo = -10.0;   // most negative coordinate value
    double hi = -0.1;    // least negative coordinate value
    int points = 7;      // per coordinate
    double slack = 1e-10;
};

struct BernsteinDiagnostics {
    struct Violation {
        std::string what;
        Vector where;
        double value;
    };
    std::vector<Violation> violations;
    double sigma_min1 = 0.0;
    GridSpec grid;
    bool pass() const { return violations.empty(); }
};

// Checks psi <= 0 and nonnegativity of first and second forward differences
// on a tensor grid. Report-only; does not throw on violations.
inline BernsteinDiagnostics validate_bernstein(const BernsteinFunction& psi,
                                               const GridSpec& grid = {}) {
    const int n = psi.arity();
    BernsteinDiagnostics diag;
    diag.sigma_min1 = psi.measure().sigma_min1();
    diag.grid = grid;
    const int pts = std::max(2, grid.points);
    const double step = (grid.hi - grid.lo) / (pts - 1);

    std::vector<int> idx(n, 0);
    Vector s(n);
    const auto at = [&](const std::vector<int>& ix) {
        for (int j = 0; j < n; ++j) s[j] = grid.lo + step * ix[j];
        return psi.eval(s);
    };
    // iterate the tensor grid
    while (true) {
        for (int j = 0; j < n; ++j) s[j] = grid.lo + step * idx[j];
        const double v = psi.eval(s);
        if (v > grid.slack)
            diag.violations.push_back({"psi > 0", s, v});
        for (int a = 0; a < n; ++a) {
            if (idx[a] + 1 >= pts) continue;
            auto ix = idx;
            ix[a]++;
            const double d1 = at(ix) - v; // forward difference toward 0: must be >= 0
            if (d1 < -grid.slack)
                diag.violations.push_back({"first difference < 0 (coord " + std::to_string(a) + ")",
                                           s, d1});
            for (int b = a; b < n; ++b) {
                if (idx[b] + 1 >= pts || (b == a && idx[a] + 2 >= pts)) continue;
                auto iy = idx;
                iy[b]++;
                auto ixy = ix;
                ixy[b]++;
                const double d2 = at(ixy) - at(ix) - at(iy) + v;
                if (d2 < -grid.slack)
                    diag.violations.push_back({"second difference < 0 (coords " +
                                                   std::to_string(a) + "," + std::to_string(b) +
                                                   ")",
                                               s, d2});
            }
        }
        int c = 0;
        while (c < n && ++idx[c] == pts) idx[c++] = 0;
        if (c == n) break;
    }
    return diag;
}

} // namespace bpcalc
