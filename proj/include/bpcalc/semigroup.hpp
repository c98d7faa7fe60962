// semigroup.hpp — commuting matrix generator tuples, T_A(u), resolvents,
// joint spectra and the norms used by the bound theorems

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bpcalc/common.hpp"

namespace bpcalc {

using Matrix = Eigen::MatrixXcd;

enum class NormKind { Operator, Trace };

// Spectral norm (largest singular value) or trace norm (sum of singular values).
inline double matrix_norm(const Matrix& m, NormKind kind) {
    if (!m.allFinite()) throw DomainError("matrix_norm: non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(m);
    if (kind == NormKind::Operator) return svd.singularValues().maxCoeff();
    return svd.singularValues().sum();
}

// Scaling-and-squaring Pade matrix exponential (Eigen's MatrixFunctions).
inline Matrix expm(const Matrix& m) { return m.exp(); }

// Joint eigenstructure of a simultaneously diagonalizable tuple: a common
// basis P and, per basis column k, the n-tuple (lambda_1^(k),...,lambda_n^(k)).
struct JointSpectrum {
    Matrix basis;                       // d x d, columns are common eigenvectors
    std::vector<Eigen::VectorXcd> eigs; // one length-d vector per generator

    Eigen::VectorXcd tuple_at(int k) const {
        Eigen::VectorXcd out(static_cast<int>(eigs.size()));
        for (std::size_t j = 0; j < eigs.size(); ++j) out[static_cast<int>(j)] = eigs[j][k];
        return out;
    }
};

struct TupleDiagnostics {
    std::vector<double> commutator_norms;  // Frobenius, per pair (i<j)
    std::vector<double> spectral_abscissa; // per generator
    double bound_estimate = 1.0;           // sup over t-grid of ||exp(t A_j)||
    bool commute_ok = true;
    bool abscissa_ok = true;
    bool bound_ok = true;
    std::vector<std::string> messages;
    bool pass() const { return commute_ok && abscissa_ok && bound_ok; }
};

struct TupleOptions {
    double commute_tolerance = 1e-10;
    double abscissa_tolerance = 1e-9;
    double bound_cap = 1e3; // estimated M_A beyond this fails validation
};

class GeneratorTuple {
public:
    GeneratorTuple(std::vector<Matrix> matrices, TupleOptions opt = {})
        : mats_(std::move(matrices)), opt_(opt) {
        if (mats_.empty()) throw InvariantViolation("GeneratorTuple: empty tuple");
        dim_ = static_cast<int>(mats_.front().rows());
        for (const auto& m : mats_) {
            if (m.rows() != dim_ || m.cols() != dim_)
                throw InvariantViolation("GeneratorTuple: matrices must be square, equal size");
            if (!m.allFinite()) throw InvariantViolation("GeneratorTuple: non-finite entries");
        }
        bound_ = estimate_bound();
    }

    int arity() const { return static_cast<int>(mats_.size()); }
    int dim() const { return dim_; }
    const Matrix& generator(int j) const { return mats_.at(j); }
    const std::vector<Matrix>& generators() const { return mats_; }
    double bound() const { return bound_; }
    const TupleOptions& options() const { return opt_; }
    const std::optional<JointSpectrum>& planted_spectrum() const { return planted_; }

    // Attach a known joint spectrum (planted constructions); verified against
    // the matrices on attachment.
    void set_planted_spectrum(JointSpectrum js) {
        Eigen::PartialPivLU<Matrix> lu(js.basis);
        for (int j = 0; j < arity(); ++j) {
            Matrix rec = js.basis * js.eigs[j].asDiagonal() * lu.inverse();
            double rel = (rec - mats_[j]).norm() / std::max(1.0, mats_[j].norm());
            if (rel > 1e-10)
                throw InvariantViolation("planted spectrum does not reproduce generator " +
                                         std::to_string(j));
        }
        planted_ = std::move(js);
    }

    TupleDiagnostics validate() const {
        TupleDiagnostics diag;
        const int n = arity();
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double comm = (mats_[i] * mats_[j] - mats_[j] * mats_[i]).norm();
                const double scale = 1.0 + mats_[i].norm() * mats_[j].norm();
                diag.commutator_norms.push_back(comm);
                if (comm > opt_.commute_tolerance * scale) {
                    diag.commute_ok = false;
                    diag.messages.push_back("generators " + std::to_string(i) + "," +
                                            std::to_string(j) + " do not commute");
                }
            }
        for (int j = 0; j < n; ++j) {
            Eigen::ComplexEigenSolver<Matrix> es(mats_[j], false);
            const double absc = es.eigenvalues().real().maxCoeff();
            diag.spectral_abscissa.push_back(absc);
            if (absc > opt_.abscissa_tolerance) {
                diag.abscissa_ok = false;
                diag.messages.push_back("generator " + std::to_string(j) +
                                        " has positive spectral abscissa");
            }
        }
        diag.bound_estimate = bound_;
        if (!(bound_ <= opt_.bound_cap)) {
            diag.bound_ok = false;
            diag.messages.push_back("semigroup bound estimate exceeds cap (" +
                                    std::to_string(bound_) + ")");
        }
        return diag;
    }

    // T_A(u) = prod_j exp(u_j A_j), u >= 0 componentwise.
    Matrix semigroup_at(const Eigen::VectorXd& u) const {
        if (u.size() != arity()) throw ArityMismatch("semigroup_at: arity mismatch");
        Matrix acc = Matrix::Identity(dim_, dim_);
        for (int j = 0; j < arity(); ++j) {
            if (!(u[j] >= 0.0) || !std::isfinite(u[j]))
                throw DomainError("semigroup_at: u must be componentwise >= 0");
            if (u[j] > 0.0) acc = acc * expm(u[j] * mats_[j]);
        }
        return acc;
    }

    // (lambda I - A_i)^{-1}
    Matrix resolvent(int i, Complex lambda) const {
        if (i < 0 || i >= arity()) throw DomainError("resolvent: index out of range");
        Matrix sys = lambda * Matrix::Identity(dim_, dim_) - mats_[i];
        Eigen::FullPivLU<Matrix> lu(sys);
        if (!lu.isInvertible())
            throw SingularResolvent("resolvent: lambda is in the spectrum of generator " +
                                    std::to_string(i));
        return lu.solve(Matrix::Identity(dim_, dim_));
    }

private:
    double estimate_bound() const {
        double sup = 1.0; // t = 0
        for (int j = 0; j < arity(); ++j)
            for (int k = -10; k <= 10; ++k) {
                const double t = std::pow(2.0, k);
                Eigen::JacobiSVD<Matrix> svd(expm(t * mats_[j]));
                sup = std::max(sup, svd.singularValues().maxCoeff());
            }
        return sup;
    }

    std::vector<Matrix> mats_;
    TupleOptions opt_;
    int dim_ = 0;
    double bound_ = 1.0;
    std::optional<JointSpectrum> planted_;
};

inline double pair_bound(const GeneratorTuple& a, const GeneratorTuple& b) {
    return std::max(a.bound(), b.bound());
}

// ---------------------------------------------------------------------------
// Simultaneous diagonalization via a random real linear combination.
// Retries with fresh coefficients; fails when off-diagonal leakage persists.

struct JointSpectrumOptions {
    double leakage_tolerance = 1e-8; // relative to ||A_j||_F
    int retries = 3;
    unsigned long long seed = 0x9e3779b97f4a7c15ull;
};

inline JointSpectrum joint_spectrum(const GeneratorTuple& tuple,
                                    const JointSpectrumOptions& opt = {}) {
    const int n = tuple.arity();
    const int d = tuple.dim();
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double best_leakage = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < opt.retries; ++attempt) {
        Matrix comb = Matrix::Zero(d, d);
        for (int j = 0; j < n; ++j) comb += Complex(gauss(rng), 0.0) * tuple.generator(j);
        Eigen::ComplexEigenSolver<Matrix> es(comb, true);
        if (es.info() != Eigen::Success) continue;
        const Matrix& P = es.eigenvectors();
        Eigen::FullPivLU<Matrix> lu(P);
        if (!lu.isInvertible()) continue;
        JointSpectrum js;
        js.basis = P;
        js.eigs.resize(n);
        double leakage = 0.0;
        for (int j = 0; j < n; ++j) {
            Matrix D = lu.solve(tuple.generator(j) * P);
            js.eigs[j] = D.diagonal();
            Matrix off = D;
            off.diagonal().setZero();
            const double rel = off.norm() / std::max(1e-300, tuple.generator(j).norm());
            leakage = std::max(leakage, rel);
        }
        best_leakage = std::min(best_leakage, leakage);
        if (leakage <= opt.leakage_tolerance) return js;
    }
    throw NotSimultaneouslyDiagonalizable(
        "joint_spectrum: off-diagonal leakage persists (best " + std::to_string(best_leakage) +
        ")");
}

// ---------------------------------------------------------------------------
// Planted constructions (seeded, reproducible)

struct PlantedOptions {
    unsigned long long seed = 1;
    int arity = 1;
    int dim = 2;
    double eig_lo = -5.0;
    double eig_hi = -0.1;
    bool unitary_basis = true; // Haar unitary (normal generators, M_A = 1)
};

inline Matrix haar_unitary(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix g(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) g(r, c) = Complex(gauss(rng), gauss(rng));
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    // fix phases so the factorization is unique given the input
    for (int c = 0; c < d; ++c) {
        Complex diag = r(c, c);
        Complex phase = diag == Complex(0.0, 0.0) ? Complex(1.0, 0.0) : diag / std::abs(diag);
        q.col(c) *= phase;
    }
    return q;
}

// Simultaneously diagonalizable tuple A_j = P diag(eigs_j) P^{-1} with real
// eigenvalues drawn uniformly from [eig_lo, eig_hi].
inline GeneratorTuple make_planted_tuple(const PlantedOptions& opt, TupleOptions topt = {}) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> eig(opt.eig_lo, opt.eig_hi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix P;
    Matrix Pinv;
    if (opt.unitary_basis) {
        P = haar_unitary(opt.dim, rng);
        Pinv = P.adjoint();
    } else {
        // well-conditioned random basis
        for (int tries = 0;; ++tries) {
            Matrix g(opt.dim, opt.dim);
            for (int r = 0; r < opt.dim; ++r)
                for (int c = 0; c < opt.dim; ++c) g(r, c) = Complex(gauss(rng), gauss(rng));
            Eigen::JacobiSVD<Matrix> svd(g);
            const double cond =
                svd.singularValues().maxCoeff() / svd.singularValues().minCoeff();
            if (cond < 50.0 || tries > 20) {
                P = g;
                Pinv = g.inverse();
                break;
            }
        }
    }
    std::vector<Matrix> mats;
    JointSpectrum js;
    js.basis = P;
    for (int j = 0; j < opt.arity; ++j) {
        Eigen::VectorXcd lam(opt.dim);
        for (int k = 0; k < opt.dim; ++k) lam[k] = Complex(eig(rng), 0.0);
        js.eigs.push_back(lam);
        mats.push_back(P * lam.asDiagonal() * Pinv);
    }
    GeneratorTuple tuple(std::move(mats), topt);
    tuple.set_planted_spectrum(std::move(js));
    return tuple;
}

} // namespace bpcalc
