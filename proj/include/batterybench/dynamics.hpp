// dynamics.hpp — Fixed-step RK4 evolution of composite (reset) and
// battery-local Lindblad models, with per-sample observable recording

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "batterybench/battery.hpp"
#include "batterybench/bounds.hpp"
#include "batterybench/models.hpp"
#include "batterybench/operators.hpp"

namespace batterybench {

// Population of the outermost `levels` ladder states at each end of factor
// `factor` must stay below `threshold` (truncation-leak guard).
struct EdgeGuard {
    int factor = 0;
    int levels = 2;
    double threshold = 1e-8;
};

struct GuardConfig {
    double trace_tol = 1e-8;
    double negativity_tol = 1e-8;
    int negativity_stride = 10;  // negativity checked every this-many samples
    std::optional<EdgeGuard> edge;
};

struct GuardStatus {
    bool tripped = false;
    double time = 0.0;
    std::string what;
    double value = 0.0;
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Sample {
    double t = 0.0;
    double e_W = 0.0;
    double dW = 0.0;
    double P = 0.0;
    double sigma_F = 0.0;
    double sigma_other = kNaN;      // sigma_V (composite) or sigma_Htilde (Lindblad)
    double bound_main = kNaN;       // 2 sigma_F sigma_V, or the open-system bound
    double bound_hermitian = kNaN;  // only when every jump is Hermitian
    double slack = kNaN;            // bound_main - |P|
    double trace_drift = 0.0;
    double edge_pop = 0.0;
    bool clamped = false;
    std::map<std::string, double> extra;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Sample> samples;
    GuardStatus guard;
    int snapshot_stride = 0;
    std::vector<std::pair<double, Operator>> snapshots;

    double min_slack() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& s : samples)
            if (!std::isnan(s.slack) && !s.clamped) m = std::min(m, s.slack);
        return m;
    }
    double max_trace_drift() const {
        double m = 0.0;
        for (const auto& s : samples) m = std::max(m, s.trace_drift);
        return m;
    }
};

struct EvolveOptions {
    double t_final = 1.0;
    double h = 0.01;
    int sample_stride = 10;
    GuardConfig guards;
    ReferenceBath bath = ReferenceBath::infinite();
    double log_floor = kDefaultLogFloor;
    int snapshot_stride = 0;  // 0 = keep no state snapshots
    // Hook for callers that derive additional per-sample observables.
    std::function<void(double, const Operator&, Sample&)> extra_recorder;
};

// ---------------------------------------------------------------------------
// Generators (dense reference implementations; the integrator below uses a
// structure-exploiting compiled form with identical math).

inline Operator generator(const LindbladModel& model, const Operator& rho) {
    model.validate();
    check_same_space(model.H_W, rho, "generator");
    Matrix h = model.H_W.entries + model.H_tilde.entries;
    Matrix out = Complex(0, -1) * (h * rho.entries - rho.entries * h);
    for (const auto& jump : model.jumps) {
        const Matrix& L = jump.L.entries;
        Matrix LdL = L.adjoint() * L;
        out += jump.rate * (L * rho.entries * L.adjoint() -
                            0.5 * (LdL * rho.entries + rho.entries * LdL));
    }
    return Operator(rho.layout, std::move(out));
}

inline Operator generator(const CompositeModel& model, const Operator& rho) {
    model.validate();
    if (!(rho.layout == model.layout))
        throw std::invalid_argument("generator: state layout does not match model");
    Matrix h = model.full_hamiltonian().entries;
    Matrix out = Complex(0, -1) * (h * rho.entries - rho.entries * h);
    for (const auto& ch : model.resets) {
        std::vector<int> keep;
        for (int k = 0; k < static_cast<int>(model.layout.factors()); ++k)
            if (k != ch.subsystem) keep.push_back(k);
        Operator traced = partial_trace(rho, keep);
        // Reinsert tau at the reset position.
        const int d = model.layout.dims[ch.subsystem];
        const int inner = model.layout.stride(ch.subsystem);
        const int outer = model.layout.total() / (d * inner);
        for (int a = 0; a < outer; ++a)
            for (int a2 = 0; a2 < outer; ++a2)
                for (int b = 0; b < inner; ++b)
                    for (int b2 = 0; b2 < inner; ++b2) {
                        const Complex m = traced.entries(a * inner + b, a2 * inner + b2);
                        for (int i = 0; i < d; ++i)
                            for (int j = 0; j < d; ++j)
                                out((a * d + i) * inner + b, (a2 * d + j) * inner + b2) +=
                                    ch.rate * ch.tau.entries(i, j) * m;
                    }
        out -= ch.rate * rho.entries;
    }
    return Operator(rho.layout, std::move(out));
}

// ---------------------------------------------------------------------------
// Compiled generator forms.

namespace detail {

struct Triplet {
    int row, col;
    Complex value;
};

// Constant-generator application cache for a composite model: the Hamiltonian
// splits into its diagonal and an off-diagonal triplet list (the engine's V is
// two entries per row), and the total reset rate folds into the diagonal pass.
// Falls back to dense commutators when the off-diagonal part is not sparse.
struct CompiledComposite {
    const CompositeModel* model = nullptr;
    Matrix phase;  // phase(a,b) = -i (E_a - E_b) - sum_i p_i
    std::vector<Triplet> offdiag;
    bool dense_fallback = false;
    Matrix h_full;

    struct Reset {
        double rate;
        Matrix tau;
        int d, inner, outer;
    };
    std::vector<Reset> resets;

    mutable Matrix traced;  // scratch for the reset partial trace

    explicit CompiledComposite(const CompositeModel& m) : model(&m) {
        m.validate();
        h_full = m.full_hamiltonian().entries;
        const int n = static_cast<int>(h_full.rows());
        double total_rate = 0.0;
        for (const auto& ch : m.resets) total_rate += ch.rate;

        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (r != c && h_full(r, c) != Complex(0, 0))
                    offdiag.push_back({r, c, h_full(r, c)});
        dense_fallback = static_cast<double>(offdiag.size()) > 0.05 * double(n) * double(n);

        phase.resize(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                phase(r, c) = Complex(0, -1) * (h_full(r, r) - h_full(c, c)) - total_rate;

        for (const auto& ch : m.resets) {
            Reset rs;
            rs.rate = ch.rate;
            rs.tau = ch.tau.entries;
            rs.d = m.layout.dims[ch.subsystem];
            rs.inner = m.layout.stride(ch.subsystem);
            rs.outer = m.layout.total() / (rs.d * rs.inner);
            resets.push_back(std::move(rs));
        }
        traced.resize(0, 0);
    }

    void apply(const Matrix& rho, Matrix& out) const {
        if (dense_fallback) {
            out.noalias() = Complex(0, -1) * (h_full * rho);
            out.noalias() += Complex(0, 1) * (rho * h_full);
            double total_rate = 0.0;
            for (const auto& rs : resets) total_rate += rs.rate;
            out -= total_rate * rho;
        } else {
            out.array() = phase.array() * rho.array();
            for (const auto& t : offdiag) {
                const Complex miv = Complex(0, -1) * t.value;
                out.row(t.row) += miv * rho.row(t.col);   // -i V rho
                out.col(t.col) -= miv * rho.col(t.row);   // +i rho V
            }
        }
        for (const auto& rs : resets) apply_reset(rs, rho, out);
    }

    void apply_reset(const Reset& rs, const Matrix& rho, Matrix& out) const {
        const int m = rs.outer * rs.inner;
        traced.resize(m, m);
        traced.setZero();
        // traced = Tr_pos(rho)
        for (int a = 0; a < rs.outer; ++a)
            for (int a2 = 0; a2 < rs.outer; ++a2)
                for (int i = 0; i < rs.d; ++i)
                    for (int b2 = 0; b2 < rs.inner; ++b2)
                        for (int b = 0; b < rs.inner; ++b)
                            traced(a * rs.inner + b, a2 * rs.inner + b2) +=
                                rho((a * rs.d + i) * rs.inner + b, (a2 * rs.d + i) * rs.inner + b2);
        // out += rate * tau (x)_pos traced
        for (int i = 0; i < rs.d; ++i)
            for (int j = 0; j < rs.d; ++j) {
                const Complex w = rs.rate * rs.tau(i, j);
                if (w == Complex(0, 0)) continue;
                for (int a = 0; a < rs.outer; ++a)
                    for (int a2 = 0; a2 < rs.outer; ++a2)
                        for (int b2 = 0; b2 < rs.inner; ++b2)
                            for (int b = 0; b < rs.inner; ++b)
                                out((a * rs.d + i) * rs.inner + b, (a2 * rs.d + j) * rs.inner + b2) +=
                                    w * traced(a * rs.inner + b, a2 * rs.inner + b2);
            }
    }
};

struct CompiledLindblad {
    const LindbladModel* model = nullptr;
    Matrix h;  // H_W + H_tilde
    struct Jump {
        double rate;
        Matrix L, Ldag, LdL;
    };
    std::vector<Jump> jumps;

    explicit CompiledLindblad(const LindbladModel& m) : model(&m) {
        m.validate();
        h = m.H_W.entries + m.H_tilde.entries;
        for (const auto& j : m.jumps) {
            Jump cj;
            cj.rate = j.rate;
            cj.L = j.L.entries;
            cj.Ldag = j.L.entries.adjoint();
            cj.LdL = cj.Ldag * cj.L;
            jumps.push_back(std::move(cj));
        }
    }

    void apply(const Matrix& rho, Matrix& out) const {
        out.noalias() = Complex(0, -1) * (h * rho);
        out.noalias() += Complex(0, 1) * (rho * h);
        for (const auto& j : jumps) {
            out.noalias() += j.rate * (j.L * rho * j.Ldag);
            out.noalias() -= (0.5 * j.rate) * (j.LdL * rho);
            out.noalias() -= (0.5 * j.rate) * (rho * j.LdL);
        }
    }
};

// One classical RK4 step on a preallocated buffer set; the output is
// symmetrized, the trace is left untouched.
template <class Compiled>
void rk4_step_inplace(const Compiled& gen, Matrix& rho, double h, Matrix& k, Matrix& acc,
                      Matrix& tmp) {
    gen.apply(rho, k);            // k1
    acc = k;
    tmp = rho + (0.5 * h) * k;
    gen.apply(tmp, k);            // k2
    acc += 2.0 * k;
    tmp = rho + (0.5 * h) * k;
    gen.apply(tmp, k);            // k3
    acc += 2.0 * k;
    tmp = rho + h * k;
    gen.apply(tmp, k);            // k4
    acc += k;
    rho += (h / 6.0) * acc;
    rho = 0.5 * (rho + rho.adjoint().eval());
}

inline double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(Matrix(0.5 * (m + m.adjoint())),
                                                 Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

}  // namespace detail

// Single public RK4 step (spec operation); evolve() below uses the same
// stepping kernel through the compiled generator.
inline Operator rk4_step(const CompositeModel& model, const Operator& rho, double h) {
    if (h <= 0.0) throw std::invalid_argument("rk4_step: step must be positive");
    detail::CompiledComposite gen(model);
    Matrix state = rho.entries, k, acc, tmp;
    detail::rk4_step_inplace(gen, state, h, k, acc, tmp);
    return Operator(rho.layout, std::move(state));
}

inline Operator rk4_step(const LindbladModel& model, const Operator& rho, double h) {
    if (h <= 0.0) throw std::invalid_argument("rk4_step: step must be positive");
    detail::CompiledLindblad gen(model);
    Matrix state = rho.entries, k, acc, tmp;
    detail::rk4_step_inplace(gen, state, h, k, acc, tmp);
    return Operator(rho.layout, std::move(state));
}

namespace detail {

inline double trace_of_product(const Matrix& a, const Matrix& b) {
    return (a.transpose().cwiseProduct(b)).sum().real();
}

inline bool check_guards_common(const GuardConfig& guards, double t, double trace_drift,
                                double edge_pop, int sample_index, const Matrix& state,
                                GuardStatus& status) {
    if (trace_drift > guards.trace_tol) {
        status = {true, t, "trace_drift", trace_drift};
        return false;
    }
    if (guards.edge && edge_pop > guards.edge->threshold) {
        status = {true, t, "edge_population", edge_pop};
        return false;
    }
    if (guards.negativity_stride > 0 && sample_index % guards.negativity_stride == 0) {
        const double min_eig = min_eigenvalue(state);
        if (min_eig < -guards.negativity_tol) {
            status = {true, t, "negativity", min_eig};
            return false;
        }
    }
    return true;
}

}  // namespace detail

// Evolve a composite model, recording e_W, dW, P, sigma_F, sigma_V and the
// isolated bound per sample. Aborts (with status) on guard violation.
inline Trajectory evolve(const CompositeModel& model, const Operator& rho0,
                         const EvolveOptions& opt) {
    if (opt.t_final <= 0.0 || opt.h <= 0.0)
        throw std::invalid_argument("evolve: t_final and h must be positive");
    if (!rho0.is_density(1e-8))
        throw std::invalid_argument("evolve: initial state is not a density matrix");
    if (!(rho0.layout == model.layout))
        throw std::invalid_argument("evolve: state layout does not match model");

    detail::CompiledComposite gen(model);
    const int n_steps = static_cast<int>(std::llround(opt.t_final / opt.h));
    const int stride = std::max(opt.sample_stride, 1);

    // Per-sample scalar observables are cheap traces against precomputed
    // matrices; only the battery marginal needs a spectral call (finite bath).
    const Matrix v_squared = model.V.entries * model.V.entries;
    const bool infinite = opt.bath.is_infinite();
    Matrix fv, vf;  // F_full V and V F_full, fixed for the infinite bath
    if (infinite) {
        const Matrix f_full = embed(model.H_W, model.layout, model.battery).entries;
        fv = f_full * model.V.entries;
        vf = model.V.entries * f_full;
    }

    Trajectory traj;
    traj.snapshot_stride = opt.snapshot_stride;
    Matrix state = rho0.entries, k, acc, tmp;
    double baseline = kNaN;
    int sample_index = 0;

    for (int step = 0; step <= n_steps; ++step) {
        const double t = step * opt.h;
        const bool is_sample = (step % stride == 0) || step == n_steps;
        if (is_sample) {
            Operator rho(model.layout, state);
            Operator rho_W = partial_trace(rho, {model.battery});

            Sample s;
            s.t = t;
            s.trace_drift = std::abs(state.trace() - Complex(1, 0));
            s.e_W = detail::trace_of_product(rho_W.entries, model.H_W.entries);

            FreeEnergyReport fr = free_energy_operator(rho_W, model.H_W, opt.bath, opt.log_floor);
            s.sigma_F = fr.sigma_F;
            s.clamped = !fr.full_rank;

            const double mean_v = detail::trace_of_product(state, model.V.entries);
            const double mean_v2 = detail::trace_of_product(state, v_squared);
            s.sigma_other = std::sqrt(std::max(mean_v2 - mean_v * mean_v, 0.0));

            if (infinite) {
                // P = -i Tr([rho, F (x) 1] V) = -i (Tr(rho F V) - Tr(rho V F))
                const Complex tr_fv = (state.transpose().cwiseProduct(fv)).sum();
                const Complex tr_vf = (state.transpose().cwiseProduct(vf)).sum();
                s.P = (Complex(0, -1) * (tr_fv - tr_vf)).real();
                s.dW = std::isnan(baseline) ? 0.0 : s.e_W - baseline;
                if (std::isnan(baseline)) baseline = s.e_W;
            } else {
                s.P = charging_power_closed(rho, fr.F, model.V, model.battery);
                const double w_max = fr.w_max.value_or(kNaN);
                s.dW = std::isnan(baseline) ? 0.0 : w_max - baseline;
                if (std::isnan(baseline)) baseline = w_max;
            }

            s.bound_main = 2.0 * s.sigma_F * s.sigma_other;
            s.slack = s.bound_main - std::abs(s.P);

            if (opt.guards.edge) {
                const auto& eg = *opt.guards.edge;
                Operator marg = (eg.factor == model.battery)
                                    ? rho_W
                                    : partial_trace(rho, {eg.factor});
                const int nm = marg.dim();
                double pop = 0.0;
                for (int i = 0; i < std::min(eg.levels, nm); ++i) pop += marg.entries(i, i).real();
                for (int i = std::max(nm - eg.levels, 0); i < nm; ++i)
                    pop += marg.entries(i, i).real();
                s.edge_pop = pop;
            }

            if (opt.extra_recorder) opt.extra_recorder(t, rho, s);

            GuardStatus status;
            if (!detail::check_guards_common(opt.guards, t, s.trace_drift, s.edge_pop, sample_index,
                                             state, status)) {
                traj.guard = status;
                traj.times.push_back(t);
                traj.samples.push_back(std::move(s));
                return traj;
            }
            if (opt.snapshot_stride > 0 && sample_index % opt.snapshot_stride == 0)
                traj.snapshots.emplace_back(t, rho);
            traj.times.push_back(t);
            traj.samples.push_back(std::move(s));
            ++sample_index;
        }
        if (step < n_steps) detail::rk4_step_inplace(gen, state, opt.h, k, acc, tmp);
    }
    return traj;
}

// Evolve a battery-local Lindblad model, recording the open-system bound (and
// the Hermitian simplification when every jump is Hermitian).
inline Trajectory evolve(const LindbladModel& model, const Operator& rho0,
                         const EvolveOptions& opt) {
    if (opt.t_final <= 0.0 || opt.h <= 0.0)
        throw std::invalid_argument("evolve: t_final and h must be positive");
    if (!rho0.is_density(1e-8))
        throw std::invalid_argument("evolve: initial state is not a density matrix");
    check_same_space(rho0, model.H_W, "evolve");

    detail::CompiledLindblad gen(model);
    const int n_steps = static_cast<int>(std::llround(opt.t_final / opt.h));
    const int stride = std::max(opt.sample_stride, 1);
    const bool hermitian_jumps = model.all_jumps_hermitian();

    Trajectory traj;
    traj.snapshot_stride = opt.snapshot_stride;
    Matrix state = rho0.entries, k, acc, tmp;
    double baseline = kNaN;
    int sample_index = 0;

    for (int step = 0; step <= n_steps; ++step) {
        const double t = step * opt.h;
        const bool is_sample = (step % stride == 0) || step == n_steps;
        if (is_sample) {
            Operator rho(model.H_W.layout, 0.5 * (state + state.adjoint().eval()));
            Sample s;
            s.t = t;
            s.trace_drift = std::abs(state.trace() - Complex(1, 0));
            s.e_W = detail::trace_of_product(rho.entries, model.H_W.entries);

            FreeEnergyReport fr = free_energy_operator(rho, model.H_W, opt.bath, opt.log_floor);
            s.sigma_F = fr.sigma_F;
            s.clamped = !fr.full_rank;

            Operator drho = generator(model, rho);
            BoundReport open_report = bound_open(rho, fr, model, drho);
            s.P = open_report.power;
            s.sigma_other = open_report.sigma_other;
            s.bound_main = open_report.bound_value;
            s.slack = open_report.slack;
            if (hermitian_jumps) {
                BoundReport herm = bound_hermitian(rho, fr, model, drho);
                s.bound_hermitian = herm.bound_value;
            }

            if (opt.bath.is_infinite()) {
                s.dW = std::isnan(baseline) ? 0.0 : s.e_W - baseline;
                if (std::isnan(baseline)) baseline = s.e_W;
            } else {
                const double w_max = fr.w_max.value_or(kNaN);
                s.dW = std::isnan(baseline) ? 0.0 : w_max - baseline;
                if (std::isnan(baseline)) baseline = w_max;
            }

            if (opt.extra_recorder) opt.extra_recorder(t, rho, s);

            GuardStatus status;
            if (!detail::check_guards_common(opt.guards, t, s.trace_drift, s.edge_pop, sample_index,
                                             state, status)) {
                traj.guard = status;
                traj.times.push_back(t);
                traj.samples.push_back(std::move(s));
                return traj;
            }
            if (opt.snapshot_stride > 0 && sample_index % opt.snapshot_stride == 0)
                traj.snapshots.emplace_back(t, rho);
            traj.times.push_back(t);
            traj.samples.push_back(std::move(s));
            ++sample_index;
        }
        if (step < n_steps) detail::rk4_step_inplace(gen, state, opt.h, k, acc, tmp);
    }
    return traj;
}

}  // namespace batterybench
