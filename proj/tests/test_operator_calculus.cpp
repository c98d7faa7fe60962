#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bpcalc/operator_calculus.hpp"
#include "test_support.hpp"

using namespace bpcalc;
using namespace bpcalc::testing;

TEST_CASE("psi_of: scalar case reproduces the closed form") {
    auto fp = BernsteinFunction::frac_power(0.5, 0, 1);
    auto A = diag_tuple({-2.0});
    auto res = psi_of(fp, A);
    CHECK(std::abs(res.value(0, 0).real() - (-std::sqrt(2.0))) <= fp.budget() * 10);
    CHECK(res.budget > 0.0);
}

TEST_CASE("psi_of: dirac gives exactly T_A(v0) - I") {
    PlantedOptions opt;
    opt.seed = 3;
    opt.arity = 2;
    opt.dim = 4;
    auto A = make_planted_tuple(opt);
    Vector v0 = vec2(0.7, 1.1);
    auto psi = BernsteinFunction::dirac(v0);
    Matrix expected = A.semigroup_at(v0) - Matrix::Identity(4, 4);
    CHECK((psi_of(psi, A).value - expected).norm() <= 1e-14);
}

TEST_CASE("psi_of: diagonal oracle") {
    auto A = diag_tuple({-1.0, -4.0});
    auto fp = BernsteinFunction::frac_power(0.5, 0, 1);
    auto res = psi_of(fp, A);
    CHECK(std::abs(res.value(0, 0).real() - (-1.0)) <= 1e-5);
    CHECK(std::abs(res.value(1, 1).real() - (-2.0)) <= 1e-5);
    // planted oracle across the catalog
    PlantedOptions opt;
    opt.seed = 9;
    opt.arity = 2;
    opt.dim = 5;
    auto T = make_planted_tuple(opt);
    for (const auto& psi :
         {BernsteinFunction::dirac(vec2(1.0, 0.4)), BernsteinFunction::log_resolvent(1.5, 1, 2),
          BernsteinFunction::frac_power(0.5, 0, 2)}) {
        const double tol = psi.budget() == 0.0 ? 1e-10 : 1e-5;
        CHECK(matrix_norm(psi_of(psi, T).value - diagonal_oracle(psi, T),
                          NormKind::Operator) <= tol);
    }
    CHECK_THROWS_AS(psi_of(fp, T), ArityMismatch);
}

TEST_CASE("subordinate: both methods agree") {
    auto A = diag_tuple({-1.0, -2.0});
    auto psi = BernsteinFunction::dirac(vec1(1.0));
    SECTION("t = 0 gives the identity on both paths") {
        for (auto method : {SubordinationMethod::ExpOfPsi, SubordinationMethod::Widder})
            CHECK((subordinate(psi, A, 0.0, method).value - Matrix::Identity(2, 2)).norm() ==
                  0.0);
    }
    SECTION("Poisson series vs exp(t psi(A))") {
        auto direct = subordinate(psi, A, 1.0, SubordinationMethod::ExpOfPsi);
        auto widder = subordinate(psi, A, 1.0, SubordinationMethod::Widder);
        CHECK((direct.value - widder.value).norm() <= 1e-8);
        // diagonal closed form e^{t(e^{lambda}-1)}
        CHECK(std::abs(direct.value(0, 0).real() - std::exp(std::expm1(-1.0))) <= 1e-12);
    }
    SECTION("stable-1/2 subordination on a diagonal tuple") {
        auto fp = BernsteinFunction::frac_power(0.5, 0, 1);
        auto D = diag_tuple({-1.0, -4.0});
        auto res = subordinate(fp, D, 2.0, SubordinationMethod::Widder);
        CHECK(std::abs(res.value(0, 0).real() - std::exp(-2.0)) <= 1e-5);
        CHECK(std::abs(res.value(1, 1).real() - std::exp(-4.0)) <= 1e-5);
        auto exp_path = subordinate(fp, D, 2.0, SubordinationMethod::ExpOfPsi);
        CHECK((res.value - exp_path.value).norm() <= 1e-5);
    }
    SECTION("norm stays within M^n") {
        PlantedOptions opt;
        opt.seed = 77;
        opt.arity = 1;
        opt.dim = 4;
        auto T = make_planted_tuple(opt);
        auto res = subordinate(psi, T, 1.5, SubordinationMethod::Widder);
        CHECK(matrix_norm(res.value, NormKind::Operator) <=
              std::pow(T.bound(), T.arity()) + 1e-8);
    }
    SECTION("widder path requires a supported catalog") {
        auto atoms = BernsteinFunction::from_atoms(1, {{vec1(1.0), 1.0}});
        CHECK_THROWS_AS(subordinate(atoms, A, 1.0, SubordinationMethod::Widder),
                        UnsupportedCatalog);
    }
    SECTION("exp path satisfies the semigroup property") {
        auto g1 = subordinate(psi, A, 0.6, SubordinationMethod::ExpOfPsi).value;
        auto g2 = subordinate(psi, A, 1.1, SubordinationMethod::ExpOfPsi).value;
        auto g12 = subordinate(psi, A, 1.7, SubordinationMethod::ExpOfPsi).value;
        CHECK((g1 * g2 - g12).norm() <= 1e-10);
    }
}

TEST_CASE("partial_operator_deriv") {
    SECTION("dirac: v0 T_A(v0)") {
        auto A = diag_tuple({-1.0, -2.0});
        auto psi = BernsteinFunction::dirac(vec1(0.9));
        Matrix expected = 0.9 * A.semigroup_at(vec1(0.9));
        CHECK((partial_operator_deriv(psi, A, 0).value - expected).norm() <= 1e-14);
    }
    SECTION("log_resolvent: diagonal oracle 1/(lambda - s)") {
        auto A = diag_tuple({-1.0, -2.0});
        auto lr = BernsteinFunction::log_resolvent(1.0, 0, 1);
        auto res = partial_operator_deriv(lr, A, 0);
        CHECK(std::abs(res.value(0, 0).real() - 0.5) <= 1e-6);
        CHECK(std::abs(res.value(1, 1).real() - 1.0 / 3.0) <= 1e-6);
    }
    SECTION("frac_power is rejected") {
        auto A = diag_tuple({-1.0, -2.0});
        auto fp = BernsteinFunction::frac_power(0.5, 0, 1);
        CHECK_THROWS_AS(partial_operator_deriv(fp, A, 0), MomentInfinite);
    }
}

TEST_CASE("frechet_derivative") {
    auto A = diag_tuple({-1.0, -2.0});
    SECTION("zero direction gives the zero matrix") {
        auto psi = BernsteinFunction::dirac(vec1(1.0));
        CHECK(frechet_derivative(psi, A, {Matrix::Zero(2, 2)}).value.norm() == 0.0);
    }
    SECTION("dirac closed form u0 diag(e^{-u0}, e^{-2u0})") {
        const double u0 = 0.8;
        auto psi = BernsteinFunction::dirac(vec1(u0));
        auto res = frechet_derivative(psi, A, {Matrix::Identity(2, 2)});
        CHECK(std::abs(res.value(0, 0).real() - u0 * std::exp(-u0)) <= 1e-14);
        CHECK(std::abs(res.value(1, 1).real() - u0 * std::exp(-2.0 * u0)) <= 1e-14);
    }
    SECTION("two-variable re-summation oracle") {
        PlantedOptions opt;
        opt.seed = 13;
        opt.arity = 2;
        opt.dim = 3;
        auto T = make_planted_tuple(opt);
        auto psi = BernsteinFunction::dirac(vec2(1.0, 1.0));
        std::mt19937_64 rng(5);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<Matrix> C;
        for (int j = 0; j < 2; ++j) {
            Matrix c(3, 3);
            for (int r = 0; r < 3; ++r)
                for (int cc = 0; cc < 3; ++cc) c(r, cc) = Complex(gauss(rng), gauss(rng));
            C.push_back(c);
        }
        // independent direct summation of sum_i (sum_k m v_i T(v)) C_i
        Matrix oracle = Matrix::Zero(3, 3);
        for (int i = 0; i < 2; ++i) {
            Matrix pd = Matrix::Zero(3, 3);
            for (const auto& nd : psi.measure().nodes)
                pd += nd.mass * nd.point[i] * T.semigroup_at(nd.point);
            oracle += pd * C[i];
        }
        CHECK((frechet_derivative(psi, T, C).value - oracle).norm() <= 1e-13);
    }
    SECTION("linearity in the direction (exact)") {
        auto psi = BernsteinFunction::dirac(vec1(1.0));
        Matrix C1 = Matrix::Identity(2, 2);
        Matrix C2(2, 2);
        C2 << Complex(0.3, 0.1), Complex(-0.2, 0.0), Complex(0.7, -0.4), Complex(0.0, 1.0);
        auto f1 = frechet_derivative(psi, A, {C1}).value;
        auto f2 = frechet_derivative(psi, A, {C2}).value;
        auto fsum = frechet_derivative(psi, A, {C1 + 2.0 * C2}).value;
        CHECK((fsum - (f1 + 2.0 * f2)).norm() <= 1e-14);
    }
}

TEST_CASE("frechet remainder study") {
    const std::vector<double> h_grid{1e-1, 1e-2, 1e-3, 1e-4};
    SECTION("zero direction: all remainders vanish") {
        auto psi = BernsteinFunction::dirac(vec1(1.0));
        auto A = diag_tuple({-1.0, -2.0});
        auto st = frechet_remainder_study(psi, A, {Matrix::Zero(2, 2)}, h_grid);
        for (const auto& s : st.samples) CHECK(s.remainder <= 1e-15);
    }
    SECTION("dirac on a diagonal pair: slope >= 1.9 and 10x drop") {
        auto psi = BernsteinFunction::dirac(vec1(1.0));
        auto A = diag_tuple({-1.0, -2.0});
        auto st =
            frechet_remainder_study(psi, A, {Matrix::Identity(2, 2)}, h_grid, NormKind::Operator);
        CHECK(st.fitted_slope >= 1.9);
        CHECK(st.ratio_drop >= 10.0);
    }
    SECTION("two-variable planted tuple, diagonal direction, both norms") {
        PlantedOptions opt;
        opt.seed = 21;
        opt.arity = 2;
        opt.dim = 4;
        auto T = make_planted_tuple(opt);
        auto psi = BernsteinFunction::dirac(vec2(1.0, 2.0));
        // diagonal direction in the common eigenbasis
        const auto& js = *T.planted_spectrum();
        std::vector<Matrix> C;
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int j = 0; j < 2; ++j) {
            Eigen::VectorXcd g(4);
            for (int k = 0; k < 4; ++k) g[k] = Complex(unif(rng), 0.0);
            C.push_back(js.basis * g.asDiagonal() * js.basis.adjoint());
        }
        for (auto kind : {NormKind::Operator, NormKind::Trace}) {
            auto st = frechet_remainder_study(psi, T, C, h_grid, kind);
            CHECK(st.fitted_slope >= 1.9);
            CHECK(st.ratio_drop >= 10.0);
        }
    }
    SECTION("non-commuting direction is rejected") {
        PlantedOptions opt;
        opt.seed = 22;
        opt.arity = 2;
        opt.dim = 3;
        auto T = make_planted_tuple(opt);
        std::vector<Matrix> C{Matrix::Zero(3, 3), Matrix::Zero(3, 3)};
        C[0](0, 1) = 5.0; // breaks commutation with the second generator
        CHECK_THROWS_AS(frechet_remainder_study(BernsteinFunction::dirac(vec2(1.0, 1.0)), T, C,
                                                {1e-1}),
                        CommutationFailure);
    }
}

TEST_CASE("divided-difference operator identities") {
    SECTION("extra = A_i collapses the increment identity to zero") {
        auto psi = BernsteinFunction::dirac(vec1(1.0));
        auto A = diag_tuple({-1.0, -2.0});
        auto chk = divided_difference_identity_check(psi, 0, A, A.generator(0));
        CHECK(chk.residual_increment <= 1e-12);
        CHECK(chk.residual_diagonal <= 1e-12);
    }
    SECTION("one-variable diagonal pair") {
        auto psi = BernsteinFunction::dirac(vec1(1.0));
        auto A = diag_tuple({-1.0, -2.0});
        Matrix extra = Matrix::Zero(2, 2);
        extra(0, 0) = -1.5;
        extra(1, 1) = -2.5;
        auto chk = divided_difference_identity_check(psi, 0, A, extra);
        CHECK(chk.residual_increment <= 1e-8);
        CHECK(chk.residual_diagonal <= 1e-8);
    }
    SECTION("two-variable planted tuple, i = 2") {
        PlantedOptions opt;
        opt.seed = 37;
        opt.arity = 2;
        opt.dim = 4;
        auto T = make_planted_tuple(opt);
        const auto& js = *T.planted_spectrum();
        Eigen::VectorXcd g(4);
        for (int k = 0; k < 4; ++k) g[k] = Complex(-1.0 - 0.3 * k, 0.0);
        Matrix extra = js.basis * g.asDiagonal() * js.basis.adjoint();
        for (const auto& psi : {BernsteinFunction::dirac(vec2(1.0, 0.5)),
                                BernsteinFunction::log_resolvent(2.0, 1, 2)}) {
            auto chk = divided_difference_identity_check(psi, 1, T, extra);
            CHECK(chk.residual_increment <= 1e-8);
            CHECK(chk.residual_diagonal <= 1e-8);
        }
    }
    SECTION("non-commuting extra matrix is rejected") {
        auto psi = BernsteinFunction::dirac(vec1(1.0));
        PlantedOptions opt;
        opt.seed = 41;
        opt.arity = 1;
        opt.dim = 3;
        auto T = make_planted_tuple(opt);
        Matrix bad = Matrix::Zero(3, 3);
        bad(0, 1) = 1.0;
        bad(1, 1) = -1.0;
        CHECK_THROWS_AS(divided_difference_identity_check(psi, 0, T, bad), CommutationFailure);
    }
}
