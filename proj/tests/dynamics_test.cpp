#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "batterybench/dynamics.hpp"
#include "batterybench/random.hpp"

using namespace batterybench;

namespace {

// Small composite with resets on both non-battery factors; dense_v controls
// whether the interaction exercises the sparse or the dense generator path.
CompositeModel small_composite(Rng& rng, bool dense_v) {
    CompositeModel model;
    model.layout = HilbertLayout({2, 3, 2});
    model.battery = 2;
    model.H_rest = Operator(HilbertLayout({2, 3}), random_hermitian(6, rng).entries);
    model.H_W = random_hermitian(2, rng);
    if (dense_v) {
        model.V = Operator(model.layout, random_hermitian(12, rng, 0.5).entries);
    } else {
        Matrix v = Matrix::Zero(12, 12);
        v(1, 8) = Complex(0.3, 0.1);
        v(8, 1) = Complex(0.3, -0.1);
        v(4, 11) = 0.2;
        v(11, 4) = 0.2;
        model.V = Operator(model.layout, std::move(v));
    }
    Matrix tau1(2, 2), tau2(3, 3);
    tau1 << 0.7, 0, 0, 0.3;
    tau2 = Matrix::Zero(3, 3);
    tau2(0, 0) = 0.5;
    tau2(1, 1) = 0.3;
    tau2(2, 2) = 0.2;
    model.resets.push_back({0, 0.4, make_single(2, tau1)});
    model.resets.push_back({1, 0.25, make_single(3, tau2)});
    return model;
}

}  // namespace

TEST_CASE("generator output is traceless and Hermitian") {
    Rng rng(3);
    for (bool dense : {false, true}) {
        CompositeModel model = small_composite(rng, dense);
        Operator rho = random_density(model.layout, rng);
        Operator g = generator(model, rho);
        REQUIRE(std::abs(g.entries.trace()) < 1e-12);
        REQUIRE(g.is_hermitian(1e-12));
    }

    LindbladModel lm{random_hermitian(3, rng), random_hermitian(3, rng, 0.3), {}};
    lm.jumps.push_back({0.2, make_single(3, random_ginibre(3, rng))});
    Operator rho = random_density(3, rng);
    Operator g = generator(lm, rho);
    REQUIRE(std::abs(g.entries.trace()) < 1e-12);
    REQUIRE(g.is_hermitian(1e-12));
}

TEST_CASE("identity jump contributes nothing") {
    Rng rng(5);
    Operator h = random_hermitian(3, rng);
    LindbladModel with{h, zero_op(h.layout), {{0.7, identity_op(h.layout)}}};
    LindbladModel without{h, zero_op(h.layout), {}};
    Operator rho = random_density(3, rng);
    Operator g1 = generator(with, rho);
    Operator g2 = generator(without, rho);
    REQUIRE((g1.entries - g2.entries).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("reset channel is stationary on its thermal target") {
    Rng rng(7);
    CompositeModel model = small_composite(rng, false);
    model.H_rest = zero_op(HilbertLayout({2, 3}));
    model.H_W = zero_op(HilbertLayout({2}));
    model.V = zero_op(model.layout);
    model.resets.resize(1);  // only the first qubit resets
    Operator rest = random_density(HilbertLayout({3, 2}), rng);
    Operator rho = tensor_product(model.resets[0].tau, rest);
    rho = Operator(model.layout, rho.entries);
    Operator g = generator(model, rho);
    REQUIRE(g.entries.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("compiled generator matches the dense reference") {
    Rng rng(11);
    for (bool dense : {false, true}) {
        CompositeModel model = small_composite(rng, dense);
        Operator rho = random_density(model.layout, rng);
        detail::CompiledComposite compiled(model);
        REQUIRE(compiled.dense_fallback == dense);
        Matrix out(12, 12);
        compiled.apply(rho.entries, out);
        Operator reference = generator(model, rho);
        REQUIRE((out - reference.entries).cwiseAbs().maxCoeff() < 1e-13);
    }

    LindbladModel lm{random_hermitian(4, rng), random_hermitian(4, rng, 0.2), {}};
    lm.jumps.push_back({0.3, make_single(4, random_ginibre(4, rng))});
    lm.jumps.push_back({0.1, random_hermitian(4, rng)});
    Operator rho = random_density(4, rng);
    detail::CompiledLindblad compiled(lm);
    Matrix out(4, 4);
    compiled.apply(rho.entries, out);
    Operator reference = generator(lm, rho);
    REQUIRE((out - reference.entries).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("rk4 step leaves a stationary state untouched") {
    Rng rng(13);
    Operator h = zero_op(HilbertLayout({3}));
    LindbladModel model{h, h, {}};
    Operator rho = random_density(3, rng);
    Operator next = rk4_step(model, rho, 0.01);
    REQUIRE((next.entries - rho.entries).cwiseAbs().maxCoeff() < 1e-16);
}

TEST_CASE("rk4 step reproduces the exact qubit phase within O(h^5)") {
    Matrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    LindbladModel model{make_single(2, Matrix(0.5 * sigma_z())),
                        zero_op(HilbertLayout({2})),
                        {}};
    const double h = 0.01;
    Operator next = rk4_step(model, make_single(2, plus), h);
    const Complex expected = 0.5 * std::exp(Complex(0, -h));
    REQUIRE(std::abs(next.entries(0, 1) - expected) < 2e-12);
}

TEST_CASE("rk4 step matches the exact reset exponential within O(h^5)") {
    // Reset-only model: populations relax toward tau at the reset rate.
    CompositeModel model;
    model.layout = HilbertLayout({2, 2});
    model.battery = 1;
    model.H_rest = zero_op(HilbertLayout({2}));
    model.H_W = zero_op(HilbertLayout({2}));
    model.V = zero_op(model.layout);
    Matrix tau(2, 2);
    tau << 1, 0, 0, 0;
    model.resets.push_back({0, 1.0, make_single(2, tau)});

    Matrix q0(2, 2);
    q0 << 0.2, 0, 0, 0.8;
    Rng rng(17);
    Operator rho0 = tensor_product(make_single(2, q0), random_density(2, rng));
    rho0 = Operator(model.layout, rho0.entries);

    const double h = 0.01;
    Operator next = rk4_step(model, rho0, h);
    Operator q_after = partial_trace(next, {0});
    const double decay = std::exp(-1.0 * h);
    const double expected00 = 1.0 + (0.2 - 1.0) * decay;
    REQUIRE(std::abs(q_after.entries(0, 0).real() - expected00) < 1e-12);
}

TEST_CASE("decoupled battery keeps its energy exactly") {
    Rng rng(19);
    CompositeModel model;
    model.layout = HilbertLayout({2, 2, 5});
    model.battery = 2;
    model.H_rest = Operator(HilbertLayout({2, 2}), random_hermitian(4, rng).entries);
    model.H_W = ladder_hamiltonian(-2, 2, 1.0);
    model.V = zero_op(model.layout);

    Operator rho0 = random_product_state(model.layout, rng, 2, 1, 3);
    EvolveOptions opt;
    opt.t_final = 100.0;
    opt.h = 0.01;
    opt.sample_stride = 100;
    Trajectory traj = evolve(model, rho0, opt);
    REQUIRE_FALSE(traj.guard.tripped);
    for (const auto& s : traj.samples) {
        REQUIRE(std::abs(s.e_W - traj.samples.front().e_W) < 1e-10);
        REQUIRE(std::abs(s.P) < 1e-12);
    }
}

TEST_CASE("dephasing in the energy eigenbasis freezes e_W and sigma_F") {
    Matrix rho_m(2, 2);
    rho_m << 0.6, Complex(0.2, 0.1), Complex(0.2, -0.1), 0.4;
    Matrix h = Matrix::Zero(2, 2);
    h(1, 1) = 1.0;
    LindbladModel model{make_single(2, h), zero_op(HilbertLayout({2})),
                        {{0.5, make_single(2, sigma_z())}}};
    EvolveOptions opt;
    opt.t_final = 20.0;
    opt.h = 0.01;
    opt.sample_stride = 50;
    Trajectory traj = evolve(model, make_single(2, rho_m), opt);
    REQUIRE_FALSE(traj.guard.tripped);
    for (const auto& s : traj.samples) {
        REQUIRE(std::abs(s.e_W - 0.4) < 1e-12);
        REQUIRE(std::abs(s.sigma_F - traj.samples.front().sigma_F) < 1e-12);
        REQUIRE(s.slack >= -1e-9);
        REQUIRE(s.bound_hermitian >= s.bound_main - 1e-10);
    }
}

TEST_CASE("trace, positivity and purity hold along a mixed composite run") {
    Rng rng(23);
    CompositeModel model = small_composite(rng, false);
    Operator rho0 = random_density(model.layout, rng);
    EvolveOptions opt;
    opt.t_final = 10.0;
    opt.h = 0.01;
    opt.sample_stride = 20;
    opt.guards.negativity_stride = 1;
    Trajectory traj = evolve(model, rho0, opt);
    REQUIRE_FALSE(traj.guard.tripped);
    REQUIRE(traj.max_trace_drift() <= 1e-8);

    // Purely unitary variant conserves purity.
    CompositeModel closed = model;
    closed.resets.clear();
    double purity0 = rho0.entries.squaredNorm();
    Operator state = rho0;
    for (int i = 0; i < 200; ++i) state = rk4_step(closed, state, 0.01);
    REQUIRE(state.entries.squaredNorm() == Catch::Approx(purity0).margin(1e-8));
}

TEST_CASE("negativity guard trips on an over-stepped stiff model") {
    Matrix h = Matrix::Zero(2, 2);
    h(1, 1) = 1.0;
    LindbladModel model{make_single(2, h), zero_op(HilbertLayout({2})),
                        {{300.0, make_single(2, sigma_minus())}}};
    Matrix rho_m(2, 2);
    rho_m << 0.1, 0, 0, 0.9;
    EvolveOptions opt;
    opt.t_final = 1.0;
    opt.h = 0.01;  // gamma h = 3: far outside the stability region
    opt.sample_stride = 1;
    opt.guards.negativity_stride = 1;
    Trajectory traj = evolve(model, make_single(2, rho_m), opt);
    REQUIRE(traj.guard.tripped);
    REQUIRE(traj.guard.what == "negativity");
}

TEST_CASE("evolve rejects invalid inputs") {
    Rng rng(29);
    CompositeModel model = small_composite(rng, false);
    EvolveOptions opt;
    opt.t_final = -1.0;
    REQUIRE_THROWS_AS(evolve(model, random_density(model.layout, rng), opt),
                      std::invalid_argument);
    opt.t_final = 1.0;
    Operator not_density = identity_op(model.layout);
    REQUIRE_THROWS_AS(evolve(model, not_density, opt), std::invalid_argument);
}

TEST_CASE("sampled observables agree with the public operations") {
    Rng rng(31);
    CompositeModel model = small_composite(rng, false);
    Operator rho0 = random_density(model.layout, rng);
    EvolveOptions opt;
    opt.t_final = 0.5;
    opt.h = 0.01;
    opt.sample_stride = 10;
    opt.snapshot_stride = 1;
    Trajectory traj = evolve(model, rho0, opt);
    REQUIRE(traj.snapshots.size() == traj.samples.size());
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
        const Operator& rho = traj.snapshots[i].second;
        Operator rho_W = partial_trace(rho, {model.battery});
        FreeEnergyReport fr = free_energy_operator(rho_W, model.H_W, opt.bath);
        BoundReport report = bound_isolated(rho, fr, model.V, model.battery);
        REQUIRE(traj.samples[i].P == Catch::Approx(report.power).margin(1e-12));
        REQUIRE(traj.samples[i].sigma_F == Catch::Approx(report.sigma_F).margin(1e-12));
        REQUIRE(traj.samples[i].sigma_other == Catch::Approx(report.sigma_other).margin(1e-12));
        REQUIRE(traj.samples[i].bound_main == Catch::Approx(report.bound_value).margin(1e-12));
    }
}
