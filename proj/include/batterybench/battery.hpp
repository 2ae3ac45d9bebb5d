// battery.hpp — Free energy operator, extractable work, entropy rate and
// charging power functionals for a battery against a reference bath

#pragma once

#include <limits>
#include <optional>

#include "batterybench/operators.hpp"

namespace batterybench {

// Reference bath defining work extraction. beta > 0, or infinite for a
// zero-temperature reference (the 1/beta term drops out of every formula).
struct ReferenceBath {
    double beta = 1.0;

    static ReferenceBath infinite() {
        ReferenceBath b;
        b.beta = std::numeric_limits<double>::infinity();
        return b;
    }
    static ReferenceBath finite(double beta) {
        if (!(beta > 0.0)) throw std::invalid_argument("ReferenceBath: beta must be positive");
        ReferenceBath b;
        b.beta = beta;
        return b;
    }
    bool is_infinite() const { return std::isinf(beta); }
    double inv_beta() const { return is_infinite() ? 0.0 : 1.0 / beta; }
};

inline constexpr double kDefaultLogFloor = 1e-12;

// Free energy operator F = H_W + (1/beta) log rho_W and the derived scalars
// for one battery state. full_rank is false when any eigenvalue of rho_W hit
// the spectral floor of the logarithm; finite-beta values are then
// clamp-dependent and downstream consumers tag them instead of asserting.
struct FreeEnergyReport {
    Operator F;
    double mean_F = 0.0;
    double sigma_F = 0.0;
    std::optional<double> w_max;  // nullopt = reference free energy diverges
    bool full_rank = true;
};

inline void check_battery_inputs(const Operator& rho_W, const Operator& H_W) {
    check_same_space(rho_W, H_W, "battery");
    if (!rho_W.is_density(1e-8))
        throw std::invalid_argument("battery: rho_W is not a density matrix");
    if (!H_W.is_hermitian(1e-10))
        throw std::invalid_argument("battery: H_W is not Hermitian");
}

// Von Neumann entropy -Tr(rho ln rho) in nats, with 0 log 0 = 0 via the
// spectral clamp.
inline double entropy(const Operator& rho, double floor = kDefaultLogFloor) {
    EigenSystem es = hermitian_eig(rho);
    double s = 0.0;
    for (int i = 0; i < es.values.size(); ++i) {
        const double p = std::max(es.values[i], 0.0);
        s -= p * std::log(std::max(es.values[i], floor));
    }
    return std::max(s, 0.0);
}

inline FreeEnergyReport free_energy_operator(const Operator& rho_W, const Operator& H_W,
                                             const ReferenceBath& bath,
                                             double floor = kDefaultLogFloor) {
    check_battery_inputs(rho_W, H_W);
    FreeEnergyReport report;
    if (bath.is_infinite()) {
        report.F = H_W;
        report.full_rank = true;  // no logarithm involved
    } else {
        EigenSystem es = hermitian_eig(rho_W);
        report.full_rank = es.values.minCoeff() > floor;
        Operator log_rho = log_psd(rho_W, floor);
        report.F = Operator(H_W.layout, H_W.entries + bath.inv_beta() * log_rho.entries);
    }
    report.mean_F = expectation(rho_W, report.F).real();
    report.sigma_F = std::sqrt(variance(rho_W, report.F));
    if (bath.is_infinite()) {
        // Zero-temperature convention: the reference free energy is the ground
        // energy, finite for any bounded-below (here: finite) Hamiltonian.
        EigenSystem es = hermitian_eig(H_W);
        report.w_max = report.mean_F - es.values.minCoeff();
    } else {
        report.w_max = report.mean_F + bath.inv_beta() * log_partition(H_W, bath.beta);
    }
    return report;
}

// W_max = F(rho) - F(tau_beta) with F(rho) = U - S/beta, computed from the
// energy/entropy route (independent of the operator route above, which the
// tests cross-check).
inline double extractable_work(const Operator& rho_W, const Operator& H_W,
                               const ReferenceBath& bath, double floor = kDefaultLogFloor) {
    check_battery_inputs(rho_W, H_W);
    if (bath.is_infinite()) {
        EigenSystem es = hermitian_eig(H_W);
        return expectation(rho_W, H_W).real() - es.values.minCoeff();
    }
    const double u = expectation(rho_W, H_W).real();
    const double s = entropy(rho_W, floor);
    // F(tau_beta) = -ln(Z)/beta without building the thermal state.
    const double f_ref = -bath.inv_beta() * log_partition(H_W, bath.beta);
    return (u - bath.inv_beta() * s) - f_ref;
}

// dS(rho_W)/dt = -i Tr(V [log rho_W (x) 1_rest, rho]) along closed full-state
// evolution. rho_W must be the battery marginal of rho.
inline double entropy_rate_closed(const Operator& rho, const Operator& rho_W, const Operator& V,
                                  int battery_pos, double floor = kDefaultLogFloor) {
    check_same_space(rho, V, "entropy_rate_closed");
    Operator marginal = partial_trace(rho, {battery_pos});
    if ((marginal.entries - rho_W.entries).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("entropy_rate_closed: rho_W is not the battery marginal of rho");
    Operator log_full = embed(log_psd(rho_W, floor), rho.layout, battery_pos);
    const Complex value =
        Complex(0, -1) * (V.entries * (log_full.entries * rho.entries - rho.entries * log_full.entries)).trace();
    if (std::abs(value.imag()) > 1e-9)
        throw std::runtime_error("entropy_rate_closed: imaginary residue above tolerance");
    return value.real();
}

// P = -i Tr([rho, F (x) 1_rest] V): the closed-dynamics charging power. F must
// come from free_energy_operator of the current battery marginal.
inline double charging_power_closed(const Operator& rho, const Operator& F, const Operator& V,
                                    int battery_pos) {
    check_same_space(rho, V, "charging_power_closed");
    Operator f_full = embed(F, rho.layout, battery_pos);
    const Complex value =
        Complex(0, -1) *
        ((rho.entries * f_full.entries - f_full.entries * rho.entries) * V.entries).trace();
    if (std::abs(value.imag()) > 1e-9)
        throw std::runtime_error("charging_power_closed: imaginary residue above tolerance");
    return value.real();
}

// P = Tr(drho_W/dt F) for reduced (open) dynamics; with F = H_W + log/beta this
// assembles dU/dt - dS/dt / beta under the module clamp conventions. For an
// infinite bath it reduces to d<H_W>/dt exactly.
inline double charging_power_open(const Operator& rho_W, const Operator& F,
                                  const Operator& generator_output) {
    check_same_space(rho_W, F, "charging_power_open");
    check_same_space(rho_W, generator_output, "charging_power_open");
    const double trace_residue = std::abs(generator_output.entries.trace());
    if (trace_residue > 1e-9 || !generator_output.is_hermitian(1e-9))
        throw std::invalid_argument("charging_power_open: generator output is not traceless Hermitian");
    return (generator_output.entries.transpose().cwiseProduct(F.entries)).sum().real();
}

}  // namespace batterybench
