// models.hpp — Dynamics model types shared by the bounds and evolution modules

#pragma once

#include <optional>
#include <vector>

#include "batterybench/operators.hpp"

namespace batterybench {

// Subsystem `subsystem` is replaced by the target state at rate `rate`:
// contributes rate * (tau (x) Tr_subsystem(rho) - rho) to drho/dt.
struct ResetChannel {
    int subsystem = 0;
    double rate = 0.0;
    Operator tau;  // density matrix on that factor
};

// Composite battery + rest-of-world model: full-space von Neumann evolution
// plus optional reset channels on non-battery factors.
//   H_full = embed(H_rest) + embed(H_W) + V
// where H_rest collects every term acting outside the battery factor.
struct CompositeModel {
    HilbertLayout layout;
    int battery = 0;          // index of the battery factor
    Operator H_rest;          // on the non-battery factors (their original order)
    Operator H_W;             // battery-local, time-independent
    Operator V;               // full-layout interaction
    std::vector<ResetChannel> resets;

    void validate() const {
        if (battery < 0 || battery >= static_cast<int>(layout.factors()))
            throw std::invalid_argument("CompositeModel: battery index out of range");
        if (H_W.dim() != layout.dims[battery])
            throw std::invalid_argument("CompositeModel: H_W dimension does not match battery factor");
        if (!(V.layout == layout))
            throw std::invalid_argument("CompositeModel: V layout mismatch");
        if (!V.is_hermitian(1e-10))
            throw std::invalid_argument("CompositeModel: V is not Hermitian");
        if (!(H_rest.layout == rest_layout()))
            throw std::invalid_argument("CompositeModel: H_rest layout does not match non-battery factors");
        for (const auto& ch : resets) {
            if (ch.rate < 0.0) throw std::invalid_argument("CompositeModel: negative reset rate");
            if (ch.subsystem == battery)
                throw std::invalid_argument("CompositeModel: reset channel on the battery factor");
            if (ch.subsystem < 0 || ch.subsystem >= static_cast<int>(layout.factors()))
                throw std::invalid_argument("CompositeModel: reset subsystem out of range");
            if (ch.tau.dim() != layout.dims[ch.subsystem] || !ch.tau.is_density(1e-9))
                throw std::invalid_argument("CompositeModel: reset target is not a density matrix on its factor");
        }
    }

    // Layout of the non-battery factors, in their original order.
    HilbertLayout rest_layout() const {
        HilbertLayout rest;
        for (int k = 0; k < static_cast<int>(layout.factors()); ++k)
            if (k != battery) rest.dims.push_back(layout.dims[k]);
        return rest;
    }

    // Full Hamiltonian embedded on the composite layout.
    Operator full_hamiltonian() const {
        Operator h = V;
        h.entries += embed(H_W, layout, battery).entries;
        h.entries += embed_rest(H_rest).entries;
        return h;
    }

    // Embed an operator on the non-battery factors into the full layout.
    Operator embed_rest(const Operator& op) const {
        if (!(op.layout == rest_layout()))
            throw std::invalid_argument("CompositeModel: operator layout does not match non-battery factors");
        const int d_bat = layout.dims[battery];
        const int inner = layout.stride(battery);
        const int outer = layout.total() / (d_bat * inner);
        // Row index decomposes as (a, i_bat, b) with a over factors left of the
        // battery and b over factors right of it; op carries the (a, b) part.
        Matrix out = Matrix::Zero(layout.total(), layout.total());
        for (int a = 0; a < outer; ++a)
            for (int a2 = 0; a2 < outer; ++a2)
                for (int b = 0; b < inner; ++b)
                    for (int b2 = 0; b2 < inner; ++b2) {
                        const Complex v = op.entries(a * inner + b, a2 * inner + b2);
                        if (v == Complex(0, 0)) continue;
                        for (int i = 0; i < d_bat; ++i)
                            out((a * d_bat + i) * inner + b, (a2 * d_bat + i) * inner + b2) = v;
                    }
        return Operator(layout, std::move(out));
    }
};

// Battery-local Markovian model: drho/dt = -i[H_W + H_tilde, rho] + dissipator.
struct JumpOperator {
    double rate = 0.0;
    Operator L;
};

struct LindbladModel {
    Operator H_W;
    Operator H_tilde;
    std::vector<JumpOperator> jumps;

    void validate() const {
        check_same_space(H_W, H_tilde, "LindbladModel");
        for (const auto& j : jumps) {
            if (j.rate < 0.0) throw std::invalid_argument("LindbladModel: negative jump rate");
            check_same_space(H_W, j.L, "LindbladModel jump");
        }
    }

    bool all_jumps_hermitian(double tol = 1e-10) const {
        for (const auto& j : jumps)
            if (!j.L.is_hermitian(tol)) return false;
        return true;
    }
};

}  // namespace batterybench
