// engine.hpp — Two-qubit + truncated-ladder heat engine: model builder,
// initial states, and the closed 9-variable moment system used as an
// independent oracle for the full density-matrix simulation

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "batterybench/dynamics.hpp"
#include "batterybench/models.hpp"
#include "batterybench/operators.hpp"

namespace batterybench {

struct EngineParams {
    double epsilon = 1.0;  // battery level spacing (energy unit)
    double g = 0.01;       // qubit-battery coupling
    double p1 = 0.01;      // cold-qubit reset rate
    double p2 = 0.01;      // hot-qubit reset rate
    double x1 = 0.51;      // E1 / T_c
    double x2 = 0.50;      // E2 / T_h
    double theta = M_PI / 2.0;
    int N = 2;             // superposition width of the coherent initial state
    int n_min = -20;       // ladder truncation window
    int n_max = 40;
    double edge_threshold = 1e-8;

    int levels() const { return n_max - n_min + 1; }

    void validate() const {
        if (epsilon <= 0.0) throw std::invalid_argument("EngineParams: epsilon must be positive");
        if (g < 0.0 || p1 < 0.0 || p2 < 0.0)
            throw std::invalid_argument("EngineParams: rates must be nonnegative");
        if (N < 1) throw std::invalid_argument("EngineParams: N must be >= 1");
        if (!(n_min <= 0 && N - 1 <= n_max))
            throw std::invalid_argument("EngineParams: ladder must contain levels 0..N-1");
    }

    // Distance of the initial support {0..N-1} from the truncation edges; the
    // scenario layer warns when this drops below 10.
    int support_margin() const { return std::min(-n_min, n_max - (N - 1)); }
};

// Ground-state population of a thermal qubit with Boltzmann exponent x:
// tau = r |0><0| + (1 - r)|1><1| with (1 - r) = r e^{-x}.
inline double thermal_ground_population(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Layout (2, 2, L): cold qubit, hot qubit, battery ladder. Only the gap
// difference E2 - E1 = epsilon enters any tracked observable, so the qubit
// Hamiltonian is built with E1 = 0.
inline CompositeModel build_engine(const EngineParams& params) {
    params.validate();
    const int L = params.levels();
    CompositeModel model;
    model.layout = HilbertLayout({2, 2, L});
    model.battery = 2;

    Matrix h_rest = Matrix::Zero(4, 4);
    h_rest(1, 1) = params.epsilon;  // |01>: hot qubit excited
    h_rest(3, 3) = params.epsilon;  // |11>
    model.H_rest = Operator(HilbertLayout({2, 2}), std::move(h_rest));

    model.H_W = ladder_hamiltonian(params.n_min, params.n_max, params.epsilon);

    // V = g sum_n |01,n><10,n+1| + h.c., indices (q1*2 + q2)*L + (n - n_min).
    Matrix v = Matrix::Zero(4 * L, 4 * L);
    for (int i = 0; i + 1 < L; ++i) {
        v(L + i, 2 * L + i + 1) = params.g;
        v(2 * L + i + 1, L + i) = params.g;
    }
    model.V = Operator(model.layout, std::move(v));

    const double r1 = thermal_ground_population(params.x1);
    const double r2 = thermal_ground_population(params.x2);
    Matrix tau1 = Matrix::Zero(2, 2), tau2 = Matrix::Zero(2, 2);
    tau1(0, 0) = r1;
    tau1(1, 1) = 1.0 - r1;
    tau2(0, 0) = r2;
    tau2(1, 1) = 1.0 - r2;
    model.resets.push_back({0, params.p1, make_single(2, tau1)});
    model.resets.push_back({1, params.p2, make_single(2, tau2)});
    return model;
}

// tau_1 (x) tau_2 (x) |0><0|: thermal switch, battery in a single level.
inline Operator initial_diag(const EngineParams& params) {
    params.validate();
    const int L = params.levels();
    const double r1 = thermal_ground_population(params.x1);
    const double r2 = thermal_ground_population(params.x2);
    Matrix rho = Matrix::Zero(4 * L, 4 * L);
    const int n0 = -params.n_min;  // index of ladder level 0
    const double w1[2] = {r1, 1.0 - r1};
    const double w2[2] = {r2, 1.0 - r2};
    for (int q1 = 0; q1 < 2; ++q1)
        for (int q2 = 0; q2 < 2; ++q2) {
            const int idx = (q1 * 2 + q2) * L + n0;
            rho(idx, idx) = w1[q1] * w2[q2];
        }
    return Operator(HilbertLayout({2, 2, L}), std::move(rho));
}

// Pure product state with the battery in an equal-weight superposition of
// levels 0..N-1. The relative phase sits on qubit 1 as exp(-i theta); with
// this sign theta = pi/2 gives a positive initial charging power, matching
// the engine (rather than refrigerator) operating mode.
inline Operator initial_psiN(const EngineParams& params) {
    params.validate();
    if (params.N - 1 > params.n_max)
        throw std::invalid_argument("initial_psiN: N exceeds the ladder");
    const int L = params.levels();
    const double r1 = thermal_ground_population(params.x1);
    const double r2 = thermal_ground_population(params.x2);

    Eigen::VectorXcd q1(2), q2(2), bat = Eigen::VectorXcd::Zero(L);
    q1 << std::sqrt(r1), std::exp(Complex(0, -params.theta)) * std::sqrt(1.0 - r1);
    q2 << std::sqrt(r2), std::sqrt(1.0 - r2);
    for (int n = 0; n < params.N; ++n) bat[n - params.n_min] = 1.0 / std::sqrt(double(params.N));

    Eigen::VectorXcd psi(4 * L);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int i = 0; i < L; ++i) psi[(a * 2 + b) * L + i] = q1[a] * q2[b] * bat[i];
    return Operator(HilbertLayout({2, 2, L}), psi * psi.adjoint());
}

// The 9 moment variables of the closed observable system. Delta and alpha are
// purely imaginary for Hermitian states, so the stored d and a carry i*Delta
// and i*alpha as reals; reduced_from_density asserts the residue.
struct ReducedEngineState {
    double d = 0.0;       // i * Delta
    double Gamma1 = 0.0;  // P(qubit1 = 0)
    double Gamma2 = 0.0;  // P(qubit2 = 0)
    double e_W = 0.0;     // Tr(H_W rho_W)
    double A = 0.0;       // Tr(H_W^2 rho_W)
    double a = 0.0;       // i * alpha
    double m_b = 0.0;
    double m_c = 0.0;
    double m_d = 0.0;

    double sigma_F() const { return std::sqrt(std::max(A - e_W * e_W, 0.0)); }
};

// Time derivative of the moment system. In the i*Delta real storage the
// first-moment equations read
//   d' = -2g (Gamma1 - Gamma2) - (p1 + p2) d
//   Gamma1' = g d + p1 (r1 - Gamma1)
//   Gamma2' = -g d + p2 (r2 - Gamma2)
//   e_W' = -g eps d
// and the second moments close with
//   A' = -g eps^2 d - 2 g eps^2 a
//   a' = -2g (m_b - m_c - m_d) - (p1 + p2) a
//   m_b' = g a - p1 m_b + (p1 r1 / eps) e_W
//   m_c' = -g a - p2 m_c + (p2 r2 / eps) e_W - p2 r2
//   m_d' = p1 r1 Gamma2 + p2 r2 Gamma1 - (p1 + p2) m_d.
inline ReducedEngineState reduced_rhs(const ReducedEngineState& s, const EngineParams& p) {
    const double r1 = thermal_ground_population(p.x1);
    const double r2 = thermal_ground_population(p.x2);
    const double g = p.g, eps = p.epsilon, psum = p.p1 + p.p2;
    ReducedEngineState out;
    out.d = -2.0 * g * (s.Gamma1 - s.Gamma2) - psum * s.d;
    out.Gamma1 = g * s.d + p.p1 * (r1 - s.Gamma1);
    out.Gamma2 = -g * s.d + p.p2 * (r2 - s.Gamma2);
    out.e_W = -g * eps * s.d;
    out.A = -g * eps * eps * s.d - 2.0 * g * eps * eps * s.a;
    out.a = -2.0 * g * (s.m_b - s.m_c - s.m_d) - psum * s.a;
    out.m_b = g * s.a - p.p1 * s.m_b + (p.p1 * r1 / eps) * s.e_W;
    out.m_c = -g * s.a - p.p2 * s.m_c + (p.p2 * r2 / eps) * s.e_W - p.p2 * r2;
    out.m_d = p.p1 * r1 * s.Gamma2 + p.p2 * r2 * s.Gamma1 - psum * s.m_d;
    return out;
}

// Evaluate the defining sums of the moment variables on a full engine state by
// direct matrix-element summation over the truncated ladder.
inline ReducedEngineState reduced_from_density(const Operator& rho, const EngineParams& params) {
    const int L = params.levels();
    if (rho.dim() != 4 * L)
        throw std::invalid_argument("reduced_from_density: state does not match engine layout");
    const Matrix& m = rho.entries;

    Complex delta = 0, alpha = 0;
    ReducedEngineState s;
    for (int i = 0; i + 1 < L; ++i) {
        const Complex up = m(L + i, 2 * L + i + 1);       // <01,n| rho |10,n+1>
        const Complex down = m(2 * L + i + 1, L + i);     // <10,n+1| rho |01,n>
        const double n = params.n_min + i;
        delta += up - down;
        alpha += n * (up - down);
    }
    if (std::abs(delta.real()) > 1e-10 || std::abs(alpha.real()) > 1e-10)
        throw std::runtime_error("reduced_from_density: real residue in Delta/alpha sums");
    s.d = -delta.imag();  // i * Delta for purely imaginary Delta
    s.a = -alpha.imag();

    for (int i = 0; i < L; ++i) {
        const double n = params.n_min + i;
        const double p00 = m(i, i).real();
        const double p01 = m(L + i, L + i).real();
        const double p10 = m(2 * L + i, 2 * L + i).real();
        const double p11 = m(3 * L + i, 3 * L + i).real();
        s.Gamma1 += p00 + p01;
        s.Gamma2 += p00 + p10;
        const double pop = p00 + p01 + p10 + p11;
        s.e_W += n * params.epsilon * pop;
        s.A += n * n * params.epsilon * params.epsilon * pop;
        s.m_b += n * (p00 + p01);
        s.m_c += (n - 1.0) * (p00 + p10);
        s.m_d += p00;
    }
    return s;
}

namespace detail {

inline ReducedEngineState axpy(const ReducedEngineState& x, double c, const ReducedEngineState& y) {
    ReducedEngineState out = x;
    out.d += c * y.d;
    out.Gamma1 += c * y.Gamma1;
    out.Gamma2 += c * y.Gamma2;
    out.e_W += c * y.e_W;
    out.A += c * y.A;
    out.a += c * y.a;
    out.m_b += c * y.m_b;
    out.m_c += c * y.m_c;
    out.m_d += c * y.m_d;
    return out;
}

inline ReducedEngineState reduced_rk4_step(const ReducedEngineState& s, const EngineParams& p,
                                           double h) {
    const ReducedEngineState k1 = reduced_rhs(s, p);
    const ReducedEngineState k2 = reduced_rhs(axpy(s, 0.5 * h, k1), p);
    const ReducedEngineState k3 = reduced_rhs(axpy(s, 0.5 * h, k2), p);
    const ReducedEngineState k4 = reduced_rhs(axpy(s, h, k3), p);
    ReducedEngineState out = axpy(s, h / 6.0, k1);
    out = axpy(out, h / 3.0, k2);
    out = axpy(out, h / 3.0, k3);
    return axpy(out, h / 6.0, k4);
}

inline void record_reduced(Sample& s, const ReducedEngineState& r) {
    s.extra["d"] = r.d;
    s.extra["Gamma1"] = r.Gamma1;
    s.extra["Gamma2"] = r.Gamma2;
    s.extra["A"] = r.A;
    s.extra["m_b"] = r.m_b;
    s.extra["m_c"] = r.m_c;
    s.extra["m_d"] = r.m_d;
}

}  // namespace detail

// Integrate the moment system on the same grid the full run samples.
inline Trajectory run_reduced(const EngineParams& params, ReducedEngineState state, double t_final,
                              double h, int sample_stride) {
    Trajectory traj;
    const int n_steps = static_cast<int>(std::llround(t_final / h));
    const int stride = std::max(sample_stride, 1);
    double baseline = 0.0;
    for (int step = 0; step <= n_steps; ++step) {
        const double t = step * h;
        if (step % stride == 0 || step == n_steps) {
            Sample s;
            s.t = t;
            s.e_W = state.e_W;
            if (step == 0) baseline = state.e_W;
            s.dW = state.e_W - baseline;
            s.P = -params.g * params.epsilon * state.d;
            s.sigma_F = state.sigma_F();
            detail::record_reduced(s, state);
            traj.times.push_back(t);
            traj.samples.push_back(std::move(s));
        }
        if (step < n_steps) state = detail::reduced_rk4_step(state, params, h);
    }
    return traj;
}

// Per-observable worst-case deviation between the full and reduced runs.
struct DeviationReport {
    struct Entry {
        std::string name;
        double max_abs = 0.0;
        // max over samples of |a-b| / max(rel_tol*max(|a|,|b|), abs_floor);
        // <= 1 means the pair agrees within tolerance everywhere.
        double worst_ratio = 0.0;
    };
    std::vector<Entry> entries;
    double rel_tol = 1e-5;
    double abs_floor = 1e-8;

    bool all_within() const {
        for (const auto& e : entries)
            if (e.worst_ratio > 1.0) return false;
        return true;
    }
    double worst() const {
        double w = 0.0;
        for (const auto& e : entries) w = std::max(w, e.worst_ratio);
        return w;
    }
};

inline DeviationReport compare_trajectories(const Trajectory& full, const Trajectory& reduced,
                                            double rel_tol = 1e-5, double abs_floor = 1e-8) {
    DeviationReport report;
    report.rel_tol = rel_tol;
    report.abs_floor = abs_floor;
    const std::size_t n = std::min(full.samples.size(), reduced.samples.size());
    auto value = [](const Sample& s, const std::string& name) {
        if (name == "e_W") return s.e_W;
        if (name == "sigma_F") return s.sigma_F;
        return s.extra.at(name);
    };
    for (const std::string& name :
         {std::string("e_W"), std::string("d"), std::string("Gamma1"), std::string("Gamma2"),
          std::string("A"), std::string("sigma_F")}) {
        DeviationReport::Entry entry;
        entry.name = name;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = value(full.samples[i], name);
            const double b = value(reduced.samples[i], name);
            const double dev = std::abs(a - b);
            const double scale = std::max(rel_tol * std::max(std::abs(a), std::abs(b)), abs_floor);
            entry.max_abs = std::max(entry.max_abs, dev);
            entry.worst_ratio = std::max(entry.worst_ratio, dev / scale);
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

enum class EngineInitial { diag, psiN };

struct EngineRun {
    Trajectory full;
    Trajectory reduced;
    DeviationReport comparison;
};

// Full density-matrix run and the reduced moment-system run on a shared grid,
// with the per-observable deviation report.
inline EngineRun run_engine(const EngineParams& params, EngineInitial initial, double t_final,
                            double h, int sample_stride, GuardConfig guards,
                            int snapshot_stride = 0) {
    CompositeModel model = build_engine(params);
    Operator rho0 = (initial == EngineInitial::diag) ? initial_diag(params) : initial_psiN(params);

    if (!guards.edge) guards.edge = EdgeGuard{model.battery, 2, params.edge_threshold};

    EvolveOptions opt;
    opt.t_final = t_final;
    opt.h = h;
    opt.sample_stride = sample_stride;
    opt.guards = guards;
    opt.bath = ReferenceBath::infinite();
    opt.snapshot_stride = snapshot_stride;
    opt.extra_recorder = [&params](double, const Operator& rho, Sample& s) {
        detail::record_reduced(s, reduced_from_density(rho, params));
    };

    EngineRun run;
    run.full = evolve(model, rho0, opt);
    run.reduced = run_reduced(params, reduced_from_density(rho0, params), t_final, h, sample_stride);
    run.comparison = compare_trajectories(run.full, run.reduced);
    return run;
}

}  // namespace batterybench
