// perturbation.hpp — semigroup-difference traces, atomic spectral shift
// distributions, the Livschits-Krein trace formula, perturbation determinants
// and Stieltjes inversion
//
// Everything here is restricted to simultaneously diagonalizable tuples with
// real nonpositive spectra, so the shift distribution is a finite signed atom
// set on R_+^n and the one-dimensional antiderivative is a step function.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bpcalc/operator_calculus.hpp"

namespace bpcalc {

// ---------------------------------------------------------------------------
// Spectral shift

struct ShiftAtom {
    Vector point; // in R_+^n
    int weight;   // signed integer multiplicity
};

struct SpectralShift {
    int arity = 0;
    std::vector<ShiftAtom> atoms;                   // sorted, merged, zero weights dropped
    std::vector<Eigen::VectorXcd> spectrum_a, spectrum_b; // joint eigenvalue tuples

    // <eta, e^{-v·t}> = sum_k w_k e^{-v·t_k}
    double laplace(const Vector& v) const {
        double acc = 0.0;
        for (const auto& a : atoms) acc += a.weight * std::exp(-v.dot(a.point));
        return acc;
    }

    int total_weight() const {
        int acc = 0;
        for (const auto& a : atoms) acc += a.weight;
        return acc;
    }

    SpectralShift negated() const {
        SpectralShift out = *this;
        std::swap(out.spectrum_a, out.spectrum_b);
        for (auto& a : out.atoms) a.weight = -a.weight;
        return out;
    }
};

namespace detail {

inline void sort_and_merge(std::vector<ShiftAtom>& atoms, double merge_tol = 1e-12) {
    std::sort(atoms.begin(), atoms.end(), [](const ShiftAtom& a, const ShiftAtom& b) {
        for (int j = 0; j < a.point.size(); ++j) {
            if (a.point[j] < b.point[j]) return true;
            if (a.point[j] > b.point[j]) return false;
        }
        return false;
    });
    std::vector<ShiftAtom> merged;
    for (const auto& a : atoms) {
        if (!merged.empty() &&
            (merged.back().point - a.point).lpNorm<Eigen::Infinity>() <= merge_tol)
            merged.back().weight += a.weight;
        else
            merged.push_back(a);
    }
    atoms.clear();
    for (auto& a : merged)
        if (a.weight != 0) atoms.push_back(std::move(a));
}

// Real nonpositive joint eigenvalues of a diagonalizable tuple, as shift
// points -lambda^(k) in R_+^n.
inline std::vector<Vector> shift_points(const GeneratorTuple& t, double imag_tol = 1e-8) {
    JointSpectrum js = t.planted_spectrum() ? *t.planted_spectrum() : joint_spectrum(t);
    std::vector<Vector> pts;
    for (int k = 0; k < t.dim(); ++k) {
        Vector p(t.arity());
        for (int j = 0; j < t.arity(); ++j) {
            const Complex lam = js.eigs[j][k];
            if (std::abs(lam.imag()) > imag_tol * (1.0 + std::abs(lam)))
                throw DomainError("spectral_shift: complex eigenvalue encountered");
            if (lam.real() > imag_tol)
                throw DomainError("spectral_shift: positive eigenvalue encountered");
            p[j] = std::max(0.0, -lam.real());
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

} // namespace detail

// eta_{A,B}: atoms at -lambda^(k) with weight +1 and -mu^(k) with weight -1.
inline SpectralShift spectral_shift(const GeneratorTuple& A, const GeneratorTuple& B) {
    if (A.arity() != B.arity()) throw ArityMismatch("spectral_shift: arity mismatch");
    if (A.dim() != B.dim()) throw ArityMismatch("spectral_shift: dimension mismatch");
    SpectralShift shift;
    shift.arity = A.arity();
    for (const auto& p : detail::shift_points(A)) shift.atoms.push_back({p, +1});
    for (const auto& p : detail::shift_points(B)) shift.atoms.push_back({p, -1});
    JointSpectrum jsa = A.planted_spectrum() ? *A.planted_spectrum() : joint_spectrum(A);
    JointSpectrum jsb = B.planted_spectrum() ? *B.planted_spectrum() : joint_spectrum(B);
    shift.spectrum_a = jsa.eigs;
    shift.spectrum_b = jsb.eigs;
    detail::sort_and_merge(shift.atoms);
    return shift;
}

// ---------------------------------------------------------------------------
// One-dimensional step function xi(t) = sum_{t_k <= t} w_k

struct ShiftFunction {
    std::vector<double> jumps;   // sorted
    std::vector<int> weights;    // per jump
    double support_end = 0.0;

    double operator()(double t) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < jumps.size(); ++k)
            if (jumps[k] <= t) acc += weights[k];
        return acc;
    }

    double distance_to_jump(double t) const {
        double d = std::numeric_limits<double>::infinity();
        for (double j : jumps) d = std::min(d, std::abs(t - j));
        return d;
    }
};

inline ShiftFunction shift_function(const SpectralShift& shift) {
    if (shift.arity != 1) throw DomainError("shift_function: defined for n = 1 only");
    ShiftFunction xi;
    for (const auto& a : shift.atoms) {
        xi.jumps.push_back(a.point[0]);
        xi.weights.push_back(a.weight);
        xi.support_end = std::max(xi.support_end, a.point[0]);
    }
    return xi;
}

// ---------------------------------------------------------------------------
// Trace of the semigroup difference with the nuclear-norm bound report

struct SemigroupDiffTrace {
    Complex trace{0.0, 0.0};
    double bound = 0.0; // M^{n+1} sum_i v_i ||A_i - B_i||_tr
    bool within_bound = true;
};

inline SemigroupDiffTrace trace_semigroup_diff(const GeneratorTuple& A, const GeneratorTuple& B,
                                               const Eigen::VectorXd& v, double slack = 1e-10) {
    if (A.arity() != B.arity() || A.dim() != B.dim())
        throw ArityMismatch("trace_semigroup_diff: shape mismatch");
    SemigroupDiffTrace out;
    out.trace = (A.semigroup_at(v) - B.semigroup_at(v)).trace();
    const double M = pair_bound(A, B);
    double acc = 0.0;
    for (int i = 0; i < A.arity(); ++i)
        acc += v[i] * matrix_norm(A.generator(i) - B.generator(i), NormKind::Trace);
    out.bound = std::pow(M, A.arity() + 1) * acc;
    out.within_bound = std::abs(out.trace) <= out.bound + slack;
    return out;
}

// ---------------------------------------------------------------------------
// Livschits-Krein trace formula:
// tr(psi(A) - psi(B)) = sum_nodes m * <eta, e^{-v·t}>  (+ c1 correction)

struct TraceFormulaResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double budget = 0.0;
};

inline TraceFormulaResult trace_formula_check(const BernsteinFunction& psi,
                                              const GeneratorTuple& A, const GeneratorTuple& B,
                                              const SpectralShift& shift) {
    if (psi.arity() != A.arity()) throw ArityMismatch("trace_formula_check: arity mismatch");
    for (int i = 0; i < psi.arity(); ++i)
        if (psi.moment1_infinite(i))
            throw MomentInfinite("trace_formula_check: psi violates the moment condition");
    OperatorResult pa = psi_of(psi, A);
    OperatorResult pb = psi_of(psi, B);
    TraceFormulaResult out;
    out.lhs = (pa.value - pb.value).trace().real();
    double acc = 0.0;
    for (const auto& nd : psi.measure().nodes) acc += nd.mass * shift.laplace(nd.point);
    // linear part: tr(c1·A - c1·B); catalog entries have c1 = 0
    for (int j = 0; j < psi.arity(); ++j)
        if (psi.c1()[j] != 0.0)
            acc += psi.c1()[j] * (A.generator(j) - B.generator(j)).trace().real();
    out.rhs = acc;
    out.residual = std::abs(out.lhs - out.rhs);
    out.budget = pa.budget + pb.budget;
    return out;
}

// Resolvent-trace identity:
//   tr(prod R(l_i,A_i) - prod R(l_i,B_i)) = sum_k w_k prod 1/(l_i + t_{k,i})
inline double resolvent_trace_check(const GeneratorTuple& A, const GeneratorTuple& B,
                                    const Eigen::VectorXcd& lambda, const SpectralShift& shift) {
    if (lambda.size() != A.arity()) throw ArityMismatch("resolvent_trace_check: arity mismatch");
    const int d = A.dim();
    Matrix ra = Matrix::Identity(d, d), rb = Matrix::Identity(d, d);
    for (int i = 0; i < A.arity(); ++i) {
        ra = ra * A.resolvent(i, lambda[i]);
        rb = rb * B.resolvent(i, lambda[i]);
    }
    const Complex lhs = (ra - rb).trace();
    Complex rhs{0.0, 0.0};
    for (const auto& a : shift.atoms) {
        Complex prod{1.0, 0.0};
        for (int i = 0; i < shift.arity; ++i) prod *= 1.0 / (lambda[i] + a.point[i]);
        rhs += static_cast<double>(a.weight) * prod;
    }
    return std::abs(lhs - rhs);
}

// Subordinated-shift identity: the shift of the pair (psi(A), psi(B)) has
// Laplace transform sum_nodes nu_s-mass * <eta_{A,B}, e^{-u·t}>.
struct SubordinatedShiftResult {
    double max_residual = 0.0;
    double budget = 0.0;
    SpectralShift shifted; // eta_{psi(A),psi(B)} computed from psi_of spectra
};

inline SubordinatedShiftResult subordinated_shift_check(const BernsteinFunction& psi,
                                                        const GeneratorTuple& A,
                                                        const GeneratorTuple& B,
                                                        const SpectralShift& shift,
                                                        const std::vector<double>& s_grid,
                                                        const WidderOptions& wopt = {}) {
    OperatorResult pa = psi_of(psi, A);
    OperatorResult pb = psi_of(psi, B);
    SubordinatedShiftResult out;
    out.budget = pa.budget + pb.budget;

    // one-dimensional shift of the pair (psi(A), psi(B)) from operator spectra
    Eigen::ComplexEigenSolver<Matrix> ea(pa.value, false), eb(pb.value, false);
    out.shifted.arity = 1;
    const double imag_tol = 1e-7;
    auto push_atoms = [&](const Eigen::VectorXcd& eigs, int w) {
        for (int k = 0; k < eigs.size(); ++k) {
            const Complex lam = eigs[k];
            if (std::abs(lam.imag()) > imag_tol * (1.0 + std::abs(lam)))
                throw DomainError("subordinated_shift_check: psi(A) spectrum not real");
            Vector p(1);
            p[0] = std::max(0.0, -lam.real());
            out.shifted.atoms.push_back({p, w});
        }
    };
    push_atoms(ea.eigenvalues(), +1);
    push_atoms(eb.eigenvalues(), -1);
    detail::sort_and_merge(out.shifted.atoms, 1e-9);

    for (double s : s_grid) {
        // lhs: <eta_{psi(A),psi(B)}, e^{-s tau}>, atoms kept unmerged enough above
        double lhs = 0.0;
        for (const auto& a : out.shifted.atoms) lhs += a.weight * std::exp(-s * a.point[0]);
        // rhs: integral of <eta_{A,B}, e^{-u·t}> against nu_s
        SubordinationMeasure nu = widder_measure(psi, s, wopt);
        double rhs = 0.0;
        for (const auto& nd : nu.nodes) rhs += nd.mass * shift.laplace(nd.point);
        out.max_residual = std::max(out.max_residual, std::abs(lhs - rhs));
        double abs_weight = 0.0;
        for (const auto& a : shift.atoms) abs_weight += std::abs(a.weight);
        out.budget = std::max(out.budget, pa.budget + pb.budget + nu.budget * abs_weight);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Perturbation determinant (n = 1)
//
// Primary definition at real lambda > 0: Delta_{B/A} = exp tr(psi_l(A) - psi_l(B))
// with psi_l(s) = log(lambda) - log(lambda - s) evaluated through its Levy
// density u^{-1} e^{-lambda u}. Analytic continuation off the cut uses the
// Stieltjes representation  log Delta(z) = -sum_k w_k Log(t_k + z).

struct DeterminantOptions {
    double budget = 1e-12;      // quadrature budget for the psi_lambda path
    int panels_per_decade = 4;
    int order = 24;
};

class DeterminantHandle {
public:
    DeterminantHandle(GeneratorTuple a, GeneratorTuple b, DeterminantOptions opt = {})
        : a_(std::move(a)), b_(std::move(b)), opt_(opt) {
        if (a_.arity() != 1 || b_.arity() != 1)
            throw DomainError("DeterminantHandle: defined for single generators (n = 1)");
        if (a_.dim() != b_.dim()) throw ArityMismatch("DeterminantHandle: dimension mismatch");
        shift_ = spectral_shift(a_, b_);
        xi_ = shift_function(shift_);
    }

    const SpectralShift& shift() const { return shift_; }
    const ShiftFunction& xi() const { return xi_; }
    const GeneratorTuple& a() const { return a_; }
    const GeneratorTuple& b() const { return b_; }

    // Quadrature-backed definition, real lambda > 0 only.
    double log_delta_primary(double lambda) const {
        if (!(lambda > 0.0)) throw DomainError("log_delta_primary: lambda must be positive");
        double s_max = 10.0;
        for (const auto* t : {&a_, &b_})
            for (const auto& m : t->generators())
                s_max = std::max(s_max, t->bound() * matrix_norm(m, NormKind::Operator));
        MeasureOptions mopt;
        mopt.budget = opt_.budget;
        mopt.s_max = s_max;
        mopt.panels_per_decade = opt_.panels_per_decade;
        mopt.order = opt_.order;
        BernsteinFunction psi_l = BernsteinFunction::log_resolvent(lambda, 0, 1, mopt);
        OperatorResult pa = psi_of(psi_l, a_);
        OperatorResult pb = psi_of(psi_l, b_);
        return (pa.value - pb.value).trace().real();
    }

    // Stieltjes-representation continuation, z off (-inf, 0] and off {-t_k}.
    Complex log_delta_continuation(Complex z) const {
        if (z.imag() == 0.0 && z.real() <= 0.0)
            throw DomainError("log_delta_continuation: z on the cut (-inf, 0]");
        Complex acc{0.0, 0.0};
        for (const auto& a : shift_.atoms) {
            const Complex arg = a.point[0] + z;
            if (std::abs(arg) == 0.0)
                throw DomainError("log_delta_continuation: z hits a spectral point");
            acc -= static_cast<double>(a.weight) * std::log(arg);
        }
        return acc;
    }

    Complex log_delta(Complex z) const {
        if (z.imag() == 0.0 && z.real() > 0.0) return Complex(log_delta_primary(z.real()), 0.0);
        return log_delta_continuation(z);
    }

    Complex delta(Complex z) const { return std::exp(log_delta(z)); }

    // Closed-form (log Delta)'(z) = -sum_k w_k/(t_k + z) = tr(R(z,B) - R(z,A))
    Complex delta_log_derivative(Complex z) const {
        Complex acc{0.0, 0.0};
        for (const auto& a : shift_.atoms) acc -= static_cast<double>(a.weight) / (a.point[0] + z);
        return acc;
    }

private:
    GeneratorTuple a_, b_;
    DeterminantOptions opt_;
    SpectralShift shift_;
    ShiftFunction xi_;
};

// det((zI - B)(zI - A)^{-1}) — the commuting-pair closed form used as oracle.
inline Complex commuting_determinant(const GeneratorTuple& A, const GeneratorTuple& B, Complex z) {
    const int d = A.dim();
    const Matrix eye = Matrix::Identity(d, d);
    const Complex num = (z * eye - B.generator(0)).determinant();
    const Complex den = (z * eye - A.generator(0)).determinant();
    if (std::abs(den) == 0.0) throw SingularResolvent("commuting_determinant: z in spectrum of A");
    return num / den;
}

struct DeterminantIdentityReport {
    double max_multiplicativity_rel = 0.0; // Delta_{B/A} Delta_{C/B} vs Delta_{C/A}
    double max_cor9_residual = 0.0;        // Delta'/Delta vs tr(R(z,B)-R(z,A))
    double max_central_diff_residual = 0.0;
};

inline DeterminantIdentityReport determinant_identity_checks(const DeterminantHandle& ab,
                                                             const DeterminantHandle& bc,
                                                             const DeterminantHandle& ac,
                                                             const std::vector<Complex>& z_grid) {
    DeterminantIdentityReport rep;
    for (Complex z : z_grid) {
        const Complex dab = std::exp(ab.log_delta_continuation(z));
        const Complex dbc = std::exp(bc.log_delta_continuation(z));
        const Complex dac = std::exp(ac.log_delta_continuation(z));
        rep.max_multiplicativity_rel =
            std::max(rep.max_multiplicativity_rel, std::abs(dab * dbc - dac) / std::abs(dac));

        const Complex closed = ab.delta_log_derivative(z);
        // resolvent-trace route
        const Complex res_trace =
            (ab.b().resolvent(0, z) - ab.a().resolvent(0, z)).trace();
        rep.max_cor9_residual = std::max(rep.max_cor9_residual, std::abs(closed - res_trace));
        // central difference of log Delta, step 1e-5 |z|
        const double h = 1e-5 * std::abs(z);
        const Complex cd =
            (ab.log_delta_continuation(z + h) - ab.log_delta_continuation(z - h)) / (2.0 * h);
        rep.max_central_diff_residual =
            std::max(rep.max_central_diff_residual, std::abs(closed - cd));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Stieltjes inversion

struct InversionSample {
    double t = 0.0;
    double xi_true = 0.0;
    double xi_recovered = 0.0;
    double abs_error = 0.0;
    bool at_jump = false; // flagged, not evaluated
};

// Complex inversion (boundary values of Im log Delta):
// xi(t) = (1/pi) Im log Delta(-t - iy) up to O(y/delta) at distance delta from jumps.
inline std::vector<InversionSample> stieltjes_inversion_complex(const DeterminantHandle& handle,
                                                                double y,
                                                                const std::vector<double>& t_grid,
                                                                double jump_guard = 1e-6) {
    if (!(y > 0.0)) throw DomainError("stieltjes_inversion_complex: y must be positive");
    std::vector<InversionSample> out;
    for (double t : t_grid) {
        InversionSample s;
        s.t = t;
        s.xi_true = handle.xi()(t);
        if (handle.xi().distance_to_jump(t) < jump_guard) {
            s.at_jump = true;
            out.push_back(s);
            continue;
        }
        s.xi_recovered = handle.log_delta_continuation(Complex(-t, -y)).imag() / M_PI;
        s.abs_error = std::abs(s.xi_recovered - s.xi_true);
        out.push_back(s);
    }
    return out;
}

namespace detail {

// Widder real-inversion operator applied to log(t + c):
//   L_k[log(·+c)](t) = ((-t)^{k-1}/(k!(k-2)!)) d^{2k-1}/dt^{2k-1} [t^k log(t+c)]
// collapses to minus the negative-binomial tail sum
//   -G_k(t,c),  G_k(t,c) = sum_{q=0}^{k} C(k-2+q, q) p^{k-1} (1-p)^q,  p = t/(t+c),
// via t^k = ((t+c)-c)^k and d^N/dx^N [x^r log x] = r! (-1)^{N-r-1} (N-r-1)! x^{r-N}.
// All summands are positive, so the evaluation is cancellation-free.
inline double widder_kernel(int k, double t, double c) {
    if (k < 2) throw DomainError("widder_kernel: k must be >= 2");
    if (!(t > 0.0)) throw DomainError("widder_kernel: t must be positive");
    if (c == 0.0) return 1.0;
    const double p = t / (t + c);
    double term = std::pow(p, k - 1);
    double acc = term;
    for (int q = 0; q < k; ++q) {
        term *= (k - 1.0 + q) / (q + 1.0) * (1.0 - p);
        acc += term;
    }
    return acc;
}

} // namespace detail

// Real Widder inversion (high-order derivative formula): exact closed-form
// differentiation of log Delta(t) = -sum_k w_k log(t + t_k).
inline std::vector<InversionSample> stieltjes_inversion_real(const DeterminantHandle& handle,
                                                             int k,
                                                             const std::vector<double>& t_grid,
                                                             double jump_guard = 1e-6) {
    std::vector<InversionSample> out;
    const auto& atoms = handle.shift().atoms;
    for (double t : t_grid) {
        InversionSample s;
        s.t = t;
        s.xi_true = handle.xi()(t);
        if (handle.xi().distance_to_jump(t) < jump_guard) {
            s.at_jump = true;
            out.push_back(s);
            continue;
        }
        double acc = 0.0;
        for (const auto& a : atoms) acc += a.weight * detail::widder_kernel(k, t, a.point[0]);
        s.xi_recovered = acc;
        s.abs_error = std::abs(s.xi_recovered - s.xi_true);
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Krein integral forms (n = 1):
//   tr(psi(A)-psi(B)) = int psi'(-t) xi(t) dt = sum_k w_k [psi(-t_k) - psi(-T)]
//   tr(psi(A)-psi(B)) = sum_nodes m u <xi, e^{-ut}>,  <xi, e^{-ut}> = sum w_k e^{-u t_k}/u

struct KreinIntegralResult {
    double lhs = 0.0;
    double rhs_antiderivative = 0.0;
    double rhs_laplace = 0.0;
    double residual = 0.0; // max of the two residuals
    double budget = 0.0;
};

inline KreinIntegralResult krein_integral_check(const BernsteinFunction& psi,
                                                const GeneratorTuple& A, const GeneratorTuple& B,
                                                const SpectralShift& shift) {
    if (psi.arity() != 1 || shift.arity != 1)
        throw DomainError("krein_integral_check: defined for n = 1");
    if (shift.total_weight() != 0)
        throw DomainError("krein_integral_check: total shift weight must vanish");
    OperatorResult pa = psi_of(psi, A);
    OperatorResult pb = psi_of(psi, B);
    KreinIntegralResult out;
    out.budget = pa.budget + pb.budget;
    out.lhs = (pa.value - pb.value).trace().real();

    double support_end = 0.0;
    for (const auto& a : shift.atoms) support_end = std::max(support_end, a.point[0]);
    const double T = 2.0 * support_end + 1.0; // window beyond the support
    const auto psi_at = [&](double s) {
        Vector arg(1);
        arg[0] = s;
        if (auto cf = psi.closed_form(arg)) return *cf;
        return psi.eval(arg);
    };
    double acc = 0.0;
    const double tail = psi_at(-T);
    for (const auto& a : shift.atoms) acc += a.weight * (psi_at(-a.point[0]) - tail);
    out.rhs_antiderivative = acc;

    double acc2 = 0.0;
    for (const auto& nd : psi.measure().nodes) {
        const double u = nd.point[0];
        double xi_transform = 0.0; // <xi, e^{-ut}> = sum w_k e^{-u t_k} / u
        for (const auto& a : shift.atoms) xi_transform += a.weight * std::exp(-u * a.point[0]) / u;
        acc2 += nd.mass * u * xi_transform;
    }
    out.rhs_laplace = acc2;

    out.residual = std::max(std::abs(out.lhs - out.rhs_antiderivative),
                            std::abs(out.lhs - out.rhs_laplace));
    return out;
}

} // namespace bpcalc
