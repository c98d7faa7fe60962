// bounds.hpp — quantitative Lipschitz and ideal-norm bound checks on
// randomized suites of commuting pairs

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "bpcalc/operator_calculus.hpp"

namespace bpcalc {

struct BoundReport {
    std::string pair_id;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0; // rhs - lhs
    NormKind norm = NormKind::Operator;
    double budget = 0.0;
    bool pass = false;
};

// ||psi(A) - psi(B)|| <= -(2e/(e-1)) n M^n psi(-(M/2n) ||A-B||)
inline BoundReport lipschitz_bound_check(const BernsteinFunction& psi, const GeneratorTuple& A,
                                         const GeneratorTuple& B,
                                         const std::string& pair_id = "") {
    if (psi.arity() != A.arity() || A.arity() != B.arity() || A.dim() != B.dim())
        throw ArityMismatch("lipschitz_bound_check: shape mismatch");
    const int n = A.arity();
    const double M = pair_bound(A, B);
    BoundReport rep;
    rep.pair_id = pair_id;
    rep.norm = NormKind::Operator;
    OperatorResult pa = psi_of(psi, A);
    OperatorResult pb = psi_of(psi, B);
    rep.lhs = matrix_norm(pa.value - pb.value, NormKind::Operator);
    Vector diff(n);
    for (int i = 0; i < n; ++i)
        diff[i] = matrix_norm(A.generator(i) - B.generator(i), NormKind::Operator);
    const double e = std::exp(1.0);
    rep.rhs = -(2.0 * e / (e - 1.0)) * n * std::pow(M, n) *
              psi.eval(-(M / (2.0 * n)) * diff);
    rep.budget = pa.budget + pb.budget + psi.measure().budget;
    rep.margin = rep.rhs - rep.lhs;
    rep.pass = rep.margin >= -rep.budget;
    return rep;
}

// ||psi(A) - psi(B)||_J <= M^{n+1} sum_i omega_i ||A_i - B_i||_J
inline BoundReport ideal_norm_bound_check(const BernsteinFunction& psi, const GeneratorTuple& A,
                                          const GeneratorTuple& B, NormKind kind,
                                          const std::string& pair_id = "") {
    if (psi.arity() != A.arity() || A.arity() != B.arity() || A.dim() != B.dim())
        throw ArityMismatch("ideal_norm_bound_check: shape mismatch");
    const int n = A.arity();
    const double M = pair_bound(A, B);
    BoundReport rep;
    rep.pair_id = pair_id;
    rep.norm = kind;
    OperatorResult pa = psi_of(psi, A);
    OperatorResult pb = psi_of(psi, B);
    rep.lhs = matrix_norm(pa.value - pb.value, kind);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        acc += psi.omega(i) * matrix_norm(A.generator(i) - B.generator(i), kind);
    rep.rhs = std::pow(M, n + 1) * acc;
    // trace-norm residuals pick up a dimension factor from the budget
    rep.budget = (pa.budget + pb.budget) * (kind == NormKind::Trace ? A.dim() : 1.0);
    rep.margin = rep.rhs - rep.lhs;
    rep.pass = rep.margin >= -rep.budget;
    return rep;
}

// ---------------------------------------------------------------------------
// Seeded random pair suite: common Haar-unitary basis, eigenvalues uniform in
// [-5, -0.1], perturbation magnitude log-uniform in [1e-3, 1].

struct PairSuiteOptions {
    unsigned long long seed = 2024;
    int count = 100;
    int arity = 1;
    int dim = 4;
    double eig_lo = -5.0;
    double eig_hi = -0.1;
    double pert_lo = 1e-3;
    double pert_hi = 1.0;
};

struct CommutingPair {
    GeneratorTuple a;
    GeneratorTuple b;
    unsigned long long seed;
};

inline CommutingPair make_commuting_pair(unsigned long long seed, int arity, int dim,
                                         double eig_lo, double eig_hi, double pert_lo,
                                         double pert_hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> eig(eig_lo, eig_hi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix P = haar_unitary(dim, rng);
    const double mag =
        pert_lo * std::pow(pert_hi / pert_lo, unit(rng)); // log-uniform magnitude
    std::vector<Matrix> ma, mb;
    JointSpectrum jsa, jsb;
    jsa.basis = P;
    jsb.basis = P;
    for (int j = 0; j < arity; ++j) {
        Eigen::VectorXcd la(dim), lb(dim);
        for (int k = 0; k < dim; ++k) {
            const double base = eig(rng);
            double pert = mag * (2.0 * unit(rng) - 1.0);
            la[k] = Complex(base, 0.0);
            lb[k] = Complex(std::min(-0.05, std::max(-5.5, base + pert)), 0.0);
        }
        jsa.eigs.push_back(la);
        jsb.eigs.push_back(lb);
        ma.push_back(P * la.asDiagonal() * P.adjoint());
        mb.push_back(P * lb.asDiagonal() * P.adjoint());
    }
    GeneratorTuple A(std::move(ma));
    GeneratorTuple B(std::move(mb));
    A.set_planted_spectrum(std::move(jsa));
    B.set_planted_spectrum(std::move(jsb));
    return {std::move(A), std::move(B), seed};
}

inline std::vector<BoundReport> lipschitz_bound_suite(const BernsteinFunction& psi,
                                                      const PairSuiteOptions& opt) {
    std::vector<BoundReport> out;
    for (int i = 0; i < opt.count; ++i) {
        CommutingPair pair = make_commuting_pair(opt.seed + i, opt.arity, opt.dim, opt.eig_lo,
                                                 opt.eig_hi, opt.pert_lo, opt.pert_hi);
        out.push_back(lipschitz_bound_check(psi, pair.a, pair.b, std::to_string(pair.seed)));
    }
    return out;
}

inline std::vector<BoundReport> ideal_norm_bound_suite(const BernsteinFunction& psi,
                                                       const PairSuiteOptions& opt,
                                                       NormKind kind) {
    std::vector<BoundReport> out;
    for (int i = 0; i < opt.count; ++i) {
        CommutingPair pair = make_commuting_pair(opt.seed + i, opt.arity, opt.dim, opt.eig_lo,
                                                 opt.eig_hi, opt.pert_lo, opt.pert_hi);
        out.push_back(ideal_norm_bound_check(psi, pair.a, pair.b, kind, std::to_string(pair.seed)));
    }
    return out;
}

} // namespace bpcalc
