// random.hpp — Seeded random operators and states for fuzz scenarios and tests

#pragma once

#include <random>

#include "batterybench/operators.hpp"

namespace batterybench {

using Rng = std::mt19937_64;

inline Matrix random_ginibre(int dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = Complex(normal(rng), normal(rng));
    return m;
}

inline Operator random_hermitian(int dim, Rng& rng, double scale = 1.0) {
    Matrix g = random_ginibre(dim, rng);
    return make_single(dim, Matrix(0.5 * scale * (g + g.adjoint())));
}

// Full-rank random density matrix, G G^dag / Tr(G G^dag) with a small identity
// admixture so eigenvalues stay comfortably away from zero.
inline Operator random_density(int dim, Rng& rng, double mix = 0.05) {
    Matrix g = random_ginibre(dim, rng);
    Matrix p = g * g.adjoint();
    p += mix * p.trace().real() / dim * Matrix::Identity(dim, dim);
    p /= p.trace().real();
    p = 0.5 * (p + p.adjoint().eval());
    return make_single(dim, std::move(p));
}

inline Operator random_density(const HilbertLayout& layout, Rng& rng, double mix = 0.05) {
    Operator d = random_density(layout.total(), rng, mix);
    return Operator(layout, std::move(d.entries));
}

inline Eigen::VectorXcd random_unit_vector(int dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXcd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = Complex(normal(rng), normal(rng));
    v.normalize();
    return v;
}

// Pure product state on the layout; the factor at `restricted_pos` (if >= 0)
// has support only on levels [lo, hi], used to keep ladder states away from
// truncation edges.
inline Operator random_product_state(const HilbertLayout& layout, Rng& rng,
                                     int restricted_pos = -1, int lo = 0, int hi = -1) {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Ones(1);
    for (std::size_t k = 0; k < layout.factors(); ++k) {
        Eigen::VectorXcd factor;
        if (static_cast<int>(k) == restricted_pos) {
            const int top = (hi < 0) ? layout.dims[k] - 1 : hi;
            if (lo < 0 || top >= layout.dims[k] || lo > top)
                throw std::invalid_argument("random_product_state: bad support window");
            factor = Eigen::VectorXcd::Zero(layout.dims[k]);
            Eigen::VectorXcd sub = random_unit_vector(top - lo + 1, rng);
            for (int i = lo; i <= top; ++i) factor[i] = sub[i - lo];
        } else {
            factor = random_unit_vector(layout.dims[k], rng);
        }
        Eigen::VectorXcd next(psi.size() * factor.size());
        for (int a = 0; a < psi.size(); ++a)
            for (int b = 0; b < factor.size(); ++b) next[a * factor.size() + b] = psi[a] * factor[b];
        psi = std::move(next);
    }
    return Operator(layout, psi * psi.adjoint());
}

}  // namespace batterybench
