#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "batterybench/operators.hpp"
#include "batterybench/random.hpp"

using namespace batterybench;

namespace {
double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }
}  // namespace

TEST_CASE("tensor product basics") {
    Operator i2 = identity_op(HilbertLayout({2}));
    Operator i4 = tensor_product(i2, i2);
    REQUIRE(i4.layout.dims == std::vector<int>{2, 2});
    REQUIRE(max_abs(i4.entries - Matrix::Identity(4, 4)) == 0.0);

    Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
    p0(0, 0) = 1;
    p1(1, 1) = 1;
    Operator prod = tensor_product(make_single(2, p0), make_single(2, p1));
    Matrix expected = Matrix::Zero(4, 4);
    expected(1, 1) = 1;  // |0>|1>
    REQUIRE(max_abs(prod.entries - expected) == 0.0);
}

TEST_CASE("trace of tensor product factorizes") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix a = random_ginibre(2, rng), b = random_ginibre(3, rng);
        Operator ab = tensor_product(make_single(2, a), make_single(3, b));
        const Complex direct = ab.entries.trace();
        const Complex product = a.trace() * b.trace();
        REQUIRE(std::abs(direct - product) < 1e-12 * std::max(1.0, std::abs(product)));
    }
}

TEST_CASE("partial trace of product state factorizes") {
    Rng rng(11);
    Operator rho = random_density(2, rng);
    Matrix sigma = random_ginibre(3, rng);
    sigma = (sigma * sigma.adjoint()).eval();
    Operator joint = tensor_product(rho, make_single(3, sigma));
    Operator back = partial_trace(joint, {0});
    REQUIRE(max_abs(back.entries - sigma.trace() * rho.entries) < 1e-12 * std::abs(sigma.trace()));

    Operator mixed = Operator(HilbertLayout({2, 2}), Matrix::Identity(4, 4) / 4.0);
    Operator second = partial_trace(mixed, {1});
    REQUIRE(max_abs(second.entries - Matrix::Identity(2, 2) / 2.0) < 1e-15);
}

TEST_CASE("partial trace matches direct index summation and preserves trace") {
    Rng rng(13);
    Operator rho = random_density(HilbertLayout({2, 2}), rng);
    Operator traced = partial_trace(rho, {1});
    // Independent summation over basis indices: rho_W[i,j] = sum_s rho[(s,i),(s,j)].
    Matrix oracle = Matrix::Zero(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int s = 0; s < 2; ++s) oracle(i, j) += rho.entries(s * 2 + i, s * 2 + j);
    REQUIRE(max_abs(traced.entries - oracle) < 1e-14);
    REQUIRE(std::abs(traced.entries.trace() - Complex(1, 0)) < 1e-12);
}

TEST_CASE("partial trace staging over disjoint kept sets is associative") {
    Rng rng(17);
    Operator rho = random_density(HilbertLayout({2, 3, 2}), rng);
    Operator direct = partial_trace(rho, {2});
    Operator staged = partial_trace(partial_trace(rho, {1, 2}), {1});
    REQUIRE(max_abs(direct.entries - staged.entries) < 1e-12);
}

TEST_CASE("partial trace rejects bad indices") {
    Operator rho = identity_op(HilbertLayout({2, 2}));
    REQUIRE_THROWS_AS(partial_trace(rho, {}), std::invalid_argument);
    REQUIRE_THROWS_AS(partial_trace(rho, {2}), std::invalid_argument);
    REQUIRE_THROWS_AS(partial_trace(rho, {1, 1}), std::invalid_argument);
}

TEST_CASE("hermitian eigendecomposition") {
    EigenSystem es = hermitian_eig(make_single(2, sigma_z()));
    REQUIRE(es.values[0] == Catch::Approx(1.0));
    REQUIRE(es.values[1] == Catch::Approx(-1.0));

    Matrix d = Matrix::Zero(3, 3);
    d(0, 0) = 3;
    d(1, 1) = 1;
    d(2, 2) = 2;
    EigenSystem es3 = hermitian_eig(make_single(3, d));
    REQUIRE(es3.values[0] == Catch::Approx(3.0));
    REQUIRE(es3.values[1] == Catch::Approx(2.0));
    REQUIRE(es3.values[2] == Catch::Approx(1.0));

    Rng rng(23);
    Operator h = random_hermitian(8, rng);
    EigenSystem es8 = hermitian_eig(h);
    Matrix rebuilt = es8.vectors * es8.values.asDiagonal().toDenseMatrix().cast<Complex>() *
                     es8.vectors.adjoint();
    REQUIRE(max_abs(rebuilt - h.entries) < 1e-9);

    Matrix nh = Matrix::Zero(2, 2);
    nh(0, 1) = 1.0;
    REQUIRE_THROWS_AS(hermitian_eig(make_single(2, nh)), std::invalid_argument);
}

TEST_CASE("log_psd clamp behaviour") {
    Matrix half = 0.5 * Matrix::Identity(2, 2);
    Operator lg = log_psd(make_single(2, half));
    REQUIRE(max_abs(lg.entries - (-std::log(2.0)) * Matrix::Identity(2, 2)) < 1e-12);

    Operator lid = log_psd(identity_op(HilbertLayout({3})));
    REQUIRE(max_abs(lid.entries) < 1e-12);

    Matrix proj = Matrix::Zero(2, 2);
    proj(0, 0) = 1.0;
    Operator lp = log_psd(make_single(2, proj), 1e-12);
    REQUIRE(lp.entries(0, 0).real() == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(lp.entries(1, 1).real() == Catch::Approx(std::log(1e-12)));

    Matrix neg = Matrix::Identity(2, 2);
    neg(1, 1) = -1e-6;
    REQUIRE_THROWS_AS(log_psd(make_single(2, neg)), std::invalid_argument);
}

TEST_CASE("log_psd inverts the exponential on full-rank states") {
    Rng rng(29);
    Operator rho = random_density(5, rng);
    Operator lg = log_psd(rho);
    EigenSystem es = hermitian_eig(lg);
    RealVector exps(es.values.size());
    for (int i = 0; i < es.values.size(); ++i) exps[i] = std::exp(es.values[i]);
    Matrix rebuilt =
        es.vectors * exps.asDiagonal().toDenseMatrix().cast<Complex>() * es.vectors.adjoint();
    REQUIRE(max_abs(rebuilt - rho.entries) < 1e-9);
}

TEST_CASE("expectation, variance, norms") {
    Operator id2 = identity_op(HilbertLayout({2}));
    Rng rng(31);
    Operator rho = random_density(2, rng);
    REQUIRE(variance(rho, id2) == 0.0);
    REQUIRE(spectral_norm(make_single(2, sigma_z())) == Catch::Approx(1.0));

    // |+><+| against sigma_z: mean 0, second moment 1.
    Matrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    REQUIRE(variance(make_single(2, plus), make_single(2, sigma_z())) == Catch::Approx(1.0));
    REQUIRE(std::abs(expectation(make_single(2, plus), make_single(2, sigma_z()))) < 1e-15);

    // Operator norm of the non-normal lowering operator is its singular value.
    REQUIRE(spectral_norm(make_single(2, sigma_minus())) == Catch::Approx(1.0));

    REQUIRE_THROWS_AS(expectation(rho, identity_op(HilbertLayout({3}))), std::invalid_argument);
    REQUIRE_THROWS_AS(variance(rho, make_single(2, Matrix(sigma_minus()))), std::invalid_argument);
}

TEST_CASE("variance stays nonnegative on random density inputs") {
    Rng rng(37);
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = 2 + static_cast<int>(rng() % 5);
        Operator rho = random_density(dim, rng);
        Operator obs = random_hermitian(dim, rng, 3.0);
        REQUIRE(variance(rho, obs) >= 0.0);
    }
}

TEST_CASE("commutator identities hold exactly") {
    Rng rng(41);
    Matrix a = random_ginibre(4, rng), b = random_ginibre(4, rng);
    Operator oa = make_single(4, a), ob = make_single(4, b);
    REQUIRE(max_abs(commutator(oa, oa).entries) == 0.0);
    REQUIRE(max_abs(commutator(oa, ob).entries + commutator(ob, oa).entries) == 0.0);
}

TEST_CASE("embed places a local operator with identities around it") {
    HilbertLayout full({2, 3, 2});
    Rng rng(43);
    Operator local = make_single(3, random_ginibre(3, rng));
    Operator embedded = embed(local, full, 1);
    Operator left = identity_op(HilbertLayout({2}));
    Operator right = identity_op(HilbertLayout({2}));
    Operator reference = tensor_product(tensor_product(left, local), right);
    REQUIRE(max_abs(embedded.entries - reference.entries) < 1e-15);
    REQUIRE_THROWS_AS(embed(local, full, 0), std::invalid_argument);
}

TEST_CASE("thermal state and partition function") {
    Rng rng(47);
    Operator h = random_hermitian(4, rng, 2.0);
    const double beta = 0.7;
    Operator tau = thermal_state(h, beta);
    REQUIRE(tau.is_density(1e-10));
    // Check against brute-force exponentiation through the eigensystem.
    EigenSystem es = hermitian_eig(h);
    double z = 0.0;
    for (int i = 0; i < 4; ++i) z += std::exp(-beta * es.values[i]);
    REQUIRE(std::log(z) == Catch::Approx(log_partition(h, beta)).epsilon(1e-12));
    Matrix expmat = Matrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
        expmat += std::exp(-beta * es.values[i]) / z * es.vectors.col(i) *
                  es.vectors.col(i).adjoint();
    REQUIRE(max_abs(tau.entries - expmat) < 1e-12);
}

TEST_CASE("density predicate") {
    Rng rng(53);
    REQUIRE(random_density(4, rng).is_density(1e-10));
    Operator not_norm = make_single(2, Matrix(2.0 * Matrix::Identity(2, 2)));
    REQUIRE_FALSE(not_norm.is_density(1e-10));
    Matrix neg = Matrix::Zero(2, 2);
    neg(0, 0) = 1.5;
    neg(1, 1) = -0.5;
    REQUIRE_FALSE(make_single(2, neg).is_density(1e-10));
}
