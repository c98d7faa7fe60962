#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bpcalc/bounds.hpp"
#include "bpcalc/perturbation.hpp"
#include "test_support.hpp"

using namespace bpcalc;
using namespace bpcalc::testing;

namespace {

GeneratorTuple diag_pair_a() { return diag_tuple({-1.0, -2.0}); }
GeneratorTuple diag_pair_b() { return diag_tuple({-1.5, -2.5}); }

} // namespace

TEST_CASE("trace of the semigroup difference") {
    auto A = diag_pair_a();
    auto B = diag_pair_b();
    SECTION("identical pair gives zero") {
        auto res = trace_semigroup_diff(A, A, vec1(1.0));
        CHECK(std::abs(res.trace) == 0.0);
        CHECK(res.within_bound);
    }
    SECTION("diagonal closed form") {
        auto res = trace_semigroup_diff(A, B, vec1(1.0));
        const double expected =
            std::exp(-1.0) + std::exp(-2.0) - std::exp(-1.5) - std::exp(-2.5);
        CHECK(res.trace.real() == Catch::Approx(expected).margin(1e-14));
        CHECK(res.within_bound);
    }
    SECTION("two-variable planted pair matches the joint-spectrum oracle") {
        auto pair = make_commuting_pair(101, 2, 4, -5.0, -0.1, 1e-2, 0.5);
        Vector v = vec2(0.8, 1.2);
        auto res = trace_semigroup_diff(pair.a, pair.b, v);
        const auto& ja = *pair.a.planted_spectrum();
        const auto& jb = *pair.b.planted_spectrum();
        Complex oracle{0.0, 0.0};
        for (int k = 0; k < 4; ++k) {
            oracle += std::exp(v[0] * ja.eigs[0][k] + v[1] * ja.eigs[1][k]);
            oracle -= std::exp(v[0] * jb.eigs[0][k] + v[1] * jb.eigs[1][k]);
        }
        CHECK(std::abs(res.trace - oracle) <= 1e-12);
        CHECK(res.within_bound);
    }
}

TEST_CASE("spectral shift construction") {
    auto A = diag_pair_a();
    auto B = diag_pair_b();
    SECTION("identical pair merges to an empty atom list") {
        CHECK(spectral_shift(A, A).atoms.empty());
    }
    SECTION("diagonal example atoms") {
        auto shift = spectral_shift(A, B);
        REQUIRE(shift.atoms.size() == 4);
        CHECK(shift.atoms[0].point[0] == Catch::Approx(1.0));
        CHECK(shift.atoms[0].weight == 1);
        CHECK(shift.atoms[1].point[0] == Catch::Approx(1.5));
        CHECK(shift.atoms[1].weight == -1);
        CHECK(shift.atoms[2].point[0] == Catch::Approx(2.0));
        CHECK(shift.atoms[2].weight == 1);
        CHECK(shift.atoms[3].point[0] == Catch::Approx(2.5));
        CHECK(shift.atoms[3].weight == -1);
        CHECK(shift.total_weight() == 0);
    }
    SECTION("two-variable shifted copy gives signed atoms in the plane") {
        Matrix P = Matrix::Identity(2, 2);
        Matrix A1 = Matrix::Zero(2, 2), A2 = Matrix::Zero(2, 2);
        A1(0, 0) = -1.0;
        A1(1, 1) = -3.0;
        A2(0, 0) = -2.0;
        A2(1, 1) = -1.0;
        GeneratorTuple T1({A1, A2});
        GeneratorTuple T2({A1 - 0.25 * Matrix::Identity(2, 2), A2 - 0.5 * Matrix::Identity(2, 2)});
        auto shift = spectral_shift(T1, T2);
        CHECK(shift.atoms.size() == 4);
        CHECK(shift.total_weight() == 0);
        for (const auto& a : shift.atoms) {
            CHECK(a.point.minCoeff() >= 0.0);
            CHECK(a.point.size() == 2);
        }
    }
    SECTION("complex or positive spectra are rejected") {
        Matrix R(2, 2); // rotation generator, eigenvalues ±i
        R << Complex(0, 0), Complex(-1, 0), Complex(1, 0), Complex(0, 0);
        GeneratorTuple rot({R});
        CHECK_THROWS_AS(spectral_shift(rot, rot), DomainError);
        CHECK_THROWS_AS(spectral_shift(diag_tuple({0.5, -1.0}), diag_pair_a()), DomainError);
    }
    SECTION("antisymmetry and the chain rule") {
        auto C = diag_tuple({-1.2, -2.2});
        auto ab = spectral_shift(A, B);
        auto ba = spectral_shift(B, A);
        REQUIRE(ab.atoms.size() == ba.atoms.size());
        for (std::size_t k = 0; k < ab.atoms.size(); ++k) {
            CHECK((ab.atoms[k].point - ba.atoms[k].point).norm() == 0.0);
            CHECK(ab.atoms[k].weight == -ba.atoms[k].weight);
        }
        auto ac = spectral_shift(A, C);
        auto bc = spectral_shift(B, C);
        std::vector<ShiftAtom> chained = ab.atoms;
        chained.insert(chained.end(), bc.atoms.begin(), bc.atoms.end());
        detail::sort_and_merge(chained);
        REQUIRE(chained.size() == ac.atoms.size());
        for (std::size_t k = 0; k < chained.size(); ++k) {
            CHECK((chained[k].point - ac.atoms[k].point).norm() == 0.0);
            CHECK(chained[k].weight == ac.atoms[k].weight);
        }
    }
    SECTION("Laplace consistency against the semigroup trace") {
        auto pair = make_commuting_pair(55, 3, 4, -5.0, -0.1, 1e-2, 0.8);
        auto shift = spectral_shift(pair.a, pair.b);
        std::mt19937_64 rng(19);
        std::uniform_real_distribution<double> unif(0.1, 3.0);
        for (int trial = 0; trial < 10; ++trial) {
            Vector v(3);
            for (int j = 0; j < 3; ++j) v[j] = unif(rng);
            auto res = trace_semigroup_diff(pair.a, pair.b, v);
            CHECK(std::abs(shift.laplace(v) - res.trace.real()) <= 1e-8);
        }
    }
}

TEST_CASE("Krein trace formula") {
    auto A = diag_pair_a();
    auto B = diag_pair_b();
    SECTION("identical pair") {
        auto shift = spectral_shift(A, A);
        auto res = trace_formula_check(BernsteinFunction::dirac(vec1(1.0)), A, A, shift);
        CHECK(res.residual <= 1e-15);
    }
    SECTION("diagonal pair, atomic psi: closed form on both sides") {
        auto shift = spectral_shift(A, B);
        auto res = trace_formula_check(BernsteinFunction::dirac(vec1(1.0)), A, B, shift);
        const double expected =
            std::exp(-1.0) + std::exp(-2.0) - std::exp(-1.5) - std::exp(-2.5);
        CHECK(res.lhs == Catch::Approx(expected).margin(1e-13));
        CHECK(res.rhs == Catch::Approx(expected).margin(1e-13));
        CHECK(res.residual <= 1e-12);
    }
    SECTION("two-variable planted pair with a log_resolvent sum") {
        auto pair = make_commuting_pair(77, 2, 5, -5.0, -0.1, 1e-2, 0.6);
        auto shift = spectral_shift(pair.a, pair.b);
        auto psi = BernsteinFunction::combination(
            {{1.0, BernsteinFunction::log_resolvent(1.0, 0, 2)},
             {1.0, BernsteinFunction::log_resolvent(2.0, 1, 2)}});
        auto res = trace_formula_check(psi, pair.a, pair.b, shift);
        CHECK(res.residual <= 1e-8);
        // eigenvalue-sum oracle
        const double oracle = trace_oracle(psi, pair.a) - trace_oracle(psi, pair.b);
        CHECK(res.lhs == Catch::Approx(oracle).margin(1e-6));
    }
    SECTION("moment condition is enforced") {
        auto shift = spectral_shift(A, B);
        CHECK_THROWS_AS(
            trace_formula_check(BernsteinFunction::frac_power(0.5, 0, 1), A, B, shift),
            MomentInfinite);
    }
}

TEST_CASE("resolvent trace identity") {
    auto A = diag_pair_a();
    auto B = diag_pair_b();
    auto shift = spectral_shift(A, B);
    SECTION("identical pair") {
        Eigen::VectorXcd lam(1);
        lam[0] = Complex(1.0, 0.0);
        CHECK(resolvent_trace_check(A, A, lam, spectral_shift(A, A)) <= 1e-15);
    }
    SECTION("diagonal pair, lambda = 1") {
        Eigen::VectorXcd lam(1);
        lam[0] = Complex(1.0, 0.0);
        CHECK(resolvent_trace_check(A, B, lam, shift) <= 1e-10);
        // value sanity: tr = 1/2 + 1/3 - 1/2.5 - 1/3.5
        Matrix diff = A.resolvent(0, lam[0]) - B.resolvent(0, lam[0]);
        CHECK(diff.trace().real() ==
              Catch::Approx(0.5 + 1.0 / 3.0 - 1.0 / 2.5 - 1.0 / 3.5).margin(1e-14));
    }
    SECTION("two-variable planted pair on a lambda grid") {
        auto pair = make_commuting_pair(91, 2, 4, -5.0, -0.1, 1e-2, 0.7);
        auto sh = spectral_shift(pair.a, pair.b);
        for (double re : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            Eigen::VectorXcd lam(2);
            lam[0] = Complex(re, 0.3);
            lam[1] = Complex(2.0 * re, -0.1);
            CHECK(resolvent_trace_check(pair.a, pair.b, lam, sh) <= 1e-10);
        }
    }
}

TEST_CASE("subordinated shift (formula 19)") {
    auto A = diag_pair_a();
    auto B = diag_pair_b();
    auto shift = spectral_shift(A, B);
    SECTION("identical pair") {
        auto res = subordinated_shift_check(BernsteinFunction::dirac(vec1(1.0)), A, A,
                                            spectral_shift(A, A), {1.0});
        CHECK(res.max_residual <= 1e-12);
    }
    SECTION("Poisson case") {
        auto res =
            subordinated_shift_check(BernsteinFunction::dirac(vec1(1.0)), A, B, shift, {0.5, 1.0, 2.0});
        CHECK(res.max_residual <= 1e-8);
    }
    SECTION("stable-1/2 case") {
        auto res = subordinated_shift_check(BernsteinFunction::frac_power(0.5, 0, 1), A, B,
                                            shift, {1.0, 2.0});
        CHECK(res.max_residual <= 1e-5);
    }
}

TEST_CASE("perturbation determinant") {
    auto A = diag_pair_a();
    auto B = diag_pair_b();
    SECTION("identical pair gives exactly one") {
        DeterminantHandle h(A, A);
        CHECK(std::abs(h.delta(Complex(3.0, 0.0)) - 1.0) <= 1e-14);
        CHECK(std::exp(h.log_delta_primary(1.0)) == Catch::Approx(1.0).margin(1e-13));
    }
    SECTION("commuting closed form at lambda = 1") {
        DeterminantHandle h(A, B);
        const double expected = 2.5 * 3.5 / (2.0 * 3.0);
        CHECK(std::exp(h.log_delta_primary(1.0)) == Catch::Approx(expected).epsilon(1e-10));
        CHECK(std::abs(h.delta(Complex(0.5, 1.0)) -
                       commuting_determinant(A, B, Complex(0.5, 1.0))) <= 1e-12);
    }
    SECTION("lambda to infinity limit") {
        DeterminantHandle h(A, B);
        double prev = std::numeric_limits<double>::infinity();
        for (double lam : {1e2, 1e4, 1e6}) {
            const double gap = std::abs(std::exp(h.log_delta_primary(lam)) - 1.0);
            CHECK(gap < prev);
            prev = gap;
        }
        CHECK(prev <= 1e-4);
    }
    SECTION("cut and spectral points are rejected") {
        DeterminantHandle h(A, B);
        CHECK_THROWS_AS(h.log_delta_continuation(Complex(-0.5, 0.0)), DomainError);
        CHECK_THROWS_AS(h.log_delta_continuation(Complex(-1.0, 0.0)), DomainError);
        CHECK_THROWS_AS(h.log_delta_primary(-2.0), DomainError);
    }
    SECTION("multiplicativity, Corollary 9, and central differences") {
        auto C = diag_tuple({-1.2, -2.7});
        DeterminantHandle ab(A, B), bc(B, C), ac(A, C);
        std::vector<Complex> grid{Complex(1.0, 0.0), Complex(2.0, 0.0), Complex(0.5, 1.5),
                                  Complex(-0.5, 2.0), Complex(3.0, -1.0)};
        auto rep = determinant_identity_checks(ab, bc, ac, grid);
        CHECK(rep.max_multiplicativity_rel <= 1e-12);
        CHECK(rep.max_cor9_residual <= 1e-10);
        CHECK(rep.max_central_diff_residual <= 1e-6);
        // Corollary 9 point value at z = 2
        const Complex lhs = ab.delta_log_derivative(Complex(2.0, 0.0));
        const double oracle = (1.0 / (2.0 + 1.5) + 1.0 / (2.0 + 2.5)) -
                              (1.0 / (2.0 + 1.0) + 1.0 / (2.0 + 2.0));
        CHECK(std::abs(lhs - Complex(oracle, 0.0)) <= 1e-14);
    }
}

TEST_CASE("Stieltjes inversion") {
    auto A = diag_pair_a();
    auto B = diag_pair_b();
    DeterminantHandle h(A, B);
    SECTION("identical pair recovers the zero shift") {
        DeterminantHandle same(A, A);
        auto samples = stieltjes_inversion_complex(same, 1e-3, {0.5, 1.2, 3.0});
        for (const auto& s : samples) CHECK(std::abs(s.xi_recovered) <= 1e-12);
    }
    SECTION("complex method at t = 1.2") {
        auto samples = stieltjes_inversion_complex(h, 1e-3, {1.2});
        REQUIRE(samples.size() == 1);
        CHECK_FALSE(samples[0].at_jump);
        CHECK(samples[0].xi_true == 1.0);
        CHECK(samples[0].abs_error <= 1e-2);
    }
    SECTION("points at jumps are flagged, not evaluated") {
        auto samples = stieltjes_inversion_complex(h, 1e-3, {1.5});
        CHECK(samples[0].at_jump);
    }
    SECTION("real method: errors decrease along k") {
        double prev = std::numeric_limits<double>::infinity();
        for (int k : {4, 8, 16}) {
            auto samples = stieltjes_inversion_real(h, k, {1.2});
            REQUIRE(samples.size() == 1);
            CHECK(samples[0].abs_error < prev);
            prev = samples[0].abs_error;
        }
    }
    SECTION("real-method kernel against direct differentiation at k = 2") {
        // L_2[log(.+c)](t) = (-t/2) d^3/dt^3 [t^2 log(t+c)]
        //                  = -t [1/(t+c) + c/(t+c)^2 + c^2/(t+c)^3]
        for (double t : {0.4, 1.2, 2.9}) {
            for (double c : {0.7, 1.0, 2.5}) {
                const double direct =
                    t * (1.0 / (t + c) + c / std::pow(t + c, 2) + c * c / std::pow(t + c, 3));
                CHECK(bpcalc::detail::widder_kernel(2, t, c) ==
                      Catch::Approx(direct).epsilon(1e-13));
            }
        }
    }
    SECTION("real-method kernel against a long-double Leibniz evaluation at k = 4") {
        // d^7/dt^7 [t^4 log(t+c)] via the Leibniz rule, evaluated in long double
        const double t = 1.3, c = 0.9;
        const int k = 4, N = 2 * k - 1;
        long double acc = 0.0L;
        long double binom = 1.0L; // C(N, j)
        for (int j = 0; j <= k; ++j) {
            // (t^k)^{(j)} = k!/(k-j)! t^{k-j}
            long double poly = 1.0L;
            for (int m = 0; m < j; ++m) poly *= (k - m);
            poly *= std::pow((long double)t, k - j);
            // (log)^{(N-j)} = (-1)^{N-j-1} (N-j-1)! (t+c)^{j-N}
            long double lg = ((N - j) % 2 == 0 ? -1.0L : 1.0L);
            for (int m = 1; m < N - j; ++m) lg *= m;
            lg *= std::pow((long double)(t + c), j - N);
            acc += binom * poly * lg;
            binom = binom * (N - j) / (j + 1);
        }
        long double pref = -std::pow((long double)t, k - 1); // (-t)^{k-1}, k even set sign
        if ((k - 1) % 2 == 0) pref = -pref;
        long double fact = 1.0L;
        for (int m = 2; m <= k; ++m) fact *= m;
        for (int m = 2; m <= k - 2; ++m) fact *= m;
        const double direct = static_cast<double>(pref * acc / fact);
        // kernel is defined with the sign of -L_k[log(.+c)]
        CHECK(bpcalc::detail::widder_kernel(4, t, c) == Catch::Approx(-direct).epsilon(1e-10));
    }
}

TEST_CASE("Krein integral forms") {
    auto A = diag_pair_a();
    auto B = diag_pair_b();
    auto shift = spectral_shift(A, B);
    SECTION("identical pair") {
        auto res = krein_integral_check(BernsteinFunction::dirac(vec1(1.0)), A, A,
                                        spectral_shift(A, A));
        CHECK(res.residual <= 1e-15);
    }
    SECTION("dirac") {
        auto res = krein_integral_check(BernsteinFunction::dirac(vec1(1.0)), A, B, shift);
        CHECK(res.residual <= 1e-10);
    }
    SECTION("log_resolvent(3)") {
        auto res = krein_integral_check(BernsteinFunction::log_resolvent(3.0, 0, 1), A, B, shift);
        CHECK(res.residual <= 1e-8);
    }
    SECTION("unbalanced shift is rejected") {
        SpectralShift bogus;
        bogus.arity = 1;
        bogus.atoms.push_back({vec1(1.0), 1});
        CHECK_THROWS_AS(krein_integral_check(BernsteinFunction::dirac(vec1(1.0)), A, B, bogus),
                        DomainError);
    }
}
