// operators.hpp — Dense complex operator algebra on tensor-product Hilbert spaces

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace batterybench {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

// Ordered list of subsystem dimensions. The row index of a full-space matrix
// decomposes as i = ((i_0 * d_1 + i_1) * d_2 + i_2) ..., i.e. the first factor
// is the most significant digit, matching the Kronecker product convention.
struct HilbertLayout {
    std::vector<int> dims;

    HilbertLayout() = default;
    explicit HilbertLayout(std::vector<int> d) : dims(std::move(d)) {
        for (int dim : dims) {
            if (dim < 1) throw std::invalid_argument("HilbertLayout: dimensions must be >= 1");
        }
    }

    int total() const {
        int n = 1;
        for (int dim : dims) n *= dim;
        return n;
    }
    std::size_t factors() const { return dims.size(); }

    // Dimension of everything to the right of factor `pos` (stride of that index).
    int stride(std::size_t pos) const {
        int s = 1;
        for (std::size_t k = pos + 1; k < dims.size(); ++k) s *= dims[k];
        return s;
    }

    bool operator==(const HilbertLayout& other) const { return dims == other.dims; }
};

// Dense square complex matrix tagged with its subsystem layout. The universal
// carrier for Hamiltonians, jump operators and density matrices.
struct Operator {
    HilbertLayout layout;
    Matrix entries;

    Operator() = default;
    Operator(HilbertLayout lay, Matrix m) : layout(std::move(lay)), entries(std::move(m)) {
        if (entries.rows() != entries.cols())
            throw std::invalid_argument("Operator: matrix must be square");
        if (entries.rows() != layout.total())
            throw std::invalid_argument("Operator: matrix dimension " + std::to_string(entries.rows()) +
                                        " does not match layout total " + std::to_string(layout.total()));
    }

    int dim() const { return static_cast<int>(entries.rows()); }

    double hermiticity_defect() const {
        return (entries - entries.adjoint()).cwiseAbs().maxCoeff();
    }
    bool is_hermitian(double tol = 1e-10) const { return hermiticity_defect() <= tol; }

    bool is_density(double tol = 1e-9) const;
};

inline Operator make_single(int dim, const Matrix& m) {
    return Operator(HilbertLayout({dim}), m);
}

inline Operator identity_op(const HilbertLayout& layout) {
    return Operator(layout, Matrix::Identity(layout.total(), layout.total()));
}

inline Operator zero_op(const HilbertLayout& layout) {
    return Operator(layout, Matrix::Zero(layout.total(), layout.total()));
}

// Pauli matrices and a few stock single-factor operators used across tests
// and scenario presets.
inline Matrix sigma_x() { Matrix m(2, 2); m << 0, 1, 1, 0; return m; }
inline Matrix sigma_y() { Matrix m(2, 2); m << 0, Complex(0, -1), Complex(0, 1), 0; return m; }
inline Matrix sigma_z() { Matrix m(2, 2); m << 1, 0, 0, -1; return m; }
inline Matrix sigma_minus() { Matrix m(2, 2); m << 0, 1, 0, 0; return m; }  // |0><1|

// Truncated ladder Hamiltonian sum_n n*eps |n><n| on levels n_min..n_max.
inline Operator ladder_hamiltonian(int n_min, int n_max, double eps) {
    if (n_max < n_min) throw std::invalid_argument("ladder_hamiltonian: empty level range");
    const int levels = n_max - n_min + 1;
    Matrix m = Matrix::Zero(levels, levels);
    for (int i = 0; i < levels; ++i) m(i, i) = eps * (n_min + i);
    return make_single(levels, m);
}

inline Operator tensor_product(const Operator& a, const Operator& b) {
    std::vector<int> dims = a.layout.dims;
    dims.insert(dims.end(), b.layout.dims.begin(), b.layout.dims.end());
    const int na = a.dim(), nb = b.dim();
    Matrix out(na * nb, na * nb);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < na; ++j)
            out.block(i * nb, j * nb, nb, nb) = a.entries(i, j) * b.entries;
    return Operator(HilbertLayout(dims), std::move(out));
}

namespace detail {

inline void check_subsystems(const HilbertLayout& layout, const std::vector<int>& subsystems) {
    if (subsystems.empty()) throw std::invalid_argument("subsystem index set must be nonempty");
    for (std::size_t k = 0; k < subsystems.size(); ++k) {
        if (subsystems[k] < 0 || subsystems[k] >= static_cast<int>(layout.factors()))
            throw std::invalid_argument("subsystem index out of range");
        if (k > 0 && subsystems[k] <= subsystems[k - 1])
            throw std::invalid_argument("subsystem indices must be strictly increasing");
    }
}

// Decompose a flat index into per-factor digits for the given layout.
inline void unflatten(int index, const HilbertLayout& layout, std::vector<int>& digits) {
    digits.resize(layout.factors());
    for (int k = static_cast<int>(layout.factors()) - 1; k >= 0; --k) {
        digits[k] = index % layout.dims[k];
        index /= layout.dims[k];
    }
}

}  // namespace detail

// Trace out every factor not listed in `keep` (strictly increasing indices).
// The kept factors retain their original relative order.
inline Operator partial_trace(const Operator& a, const std::vector<int>& keep) {
    detail::check_subsystems(a.layout, keep);

    const auto& dims = a.layout.dims;
    std::vector<int> kept_dims, traced(dims.size(), 1);
    for (int k : keep) kept_dims.push_back(dims[k]);

    // Strides of each factor in the full index, and the builder of a full
    // index from (kept digits, traced digits).
    std::vector<int> stride(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) stride[k] = a.layout.stride(k);

    std::vector<int> is_kept(dims.size(), 0);
    for (int k : keep) is_kept[k] = 1;
    std::vector<int> traced_idx;
    for (std::size_t k = 0; k < dims.size(); ++k)
        if (!is_kept[k]) traced_idx.push_back(static_cast<int>(k));

    int n_keep = 1;
    for (int d : kept_dims) n_keep *= d;
    int n_trace = 1;
    for (int k : traced_idx) n_trace *= dims[k];

    // Offset of each kept multi-index and each traced multi-index in the full
    // flat index; a full index is the sum of one offset from each table.
    std::vector<int> keep_offset(n_keep), trace_offset(n_trace);
    {
        std::vector<int> digit(keep.size(), 0);
        for (int r = 0; r < n_keep; ++r) {
            int off = 0;
            for (std::size_t k = 0; k < keep.size(); ++k) off += digit[k] * stride[keep[k]];
            keep_offset[r] = off;
            for (int k = static_cast<int>(keep.size()) - 1; k >= 0; --k) {
                if (++digit[k] < dims[keep[k]]) break;
                digit[k] = 0;
            }
        }
    }
    {
        std::vector<int> digit(traced_idx.size(), 0);
        for (int r = 0; r < n_trace; ++r) {
            int off = 0;
            for (std::size_t k = 0; k < traced_idx.size(); ++k) off += digit[k] * stride[traced_idx[k]];
            trace_offset[r] = off;
            for (int k = static_cast<int>(traced_idx.size()) - 1; k >= 0; --k) {
                if (++digit[k] < dims[traced_idx[k]]) break;
                digit[k] = 0;
            }
        }
    }

    Matrix out = Matrix::Zero(n_keep, n_keep);
    for (int r = 0; r < n_keep; ++r)
        for (int c = 0; c < n_keep; ++c) {
            Complex sum = 0;
            for (int t = 0; t < n_trace; ++t)
                sum += a.entries(keep_offset[r] + trace_offset[t], keep_offset[c] + trace_offset[t]);
            out(r, c) = sum;
        }
    return Operator(HilbertLayout(kept_dims), std::move(out));
}

// Embed a single-factor operator at position `pos` of the full layout
// (identity on every other factor).
inline Operator embed(const Operator& local, const HilbertLayout& full, int pos) {
    if (pos < 0 || pos >= static_cast<int>(full.factors()))
        throw std::invalid_argument("embed: position out of range");
    if (local.dim() != full.dims[pos])
        throw std::invalid_argument("embed: local dimension does not match layout factor");

    const int d = full.dims[pos];
    const int inner = full.stride(pos);          // dimension to the right
    const int outer = full.total() / (d * inner);  // dimension to the left
    Matrix out = Matrix::Zero(full.total(), full.total());
    for (int a = 0; a < outer; ++a)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                const Complex v = local.entries(i, j);
                if (v == Complex(0, 0)) continue;
                const int row0 = (a * d + i) * inner;
                const int col0 = (a * d + j) * inner;
                for (int b = 0; b < inner; ++b) out(row0 + b, col0 + b) = v;
            }
    return Operator(full, std::move(out));
}

struct EigenSystem {
    RealVector values;  // descending
    Matrix vectors;     // unitary, columns match values
};

// Spectral decomposition of a Hermitian operator. The input is symmetrized
// ((A + A^dag)/2) first to suppress integrator round-off drift; inputs further
// than `tol` from Hermitian are rejected.
inline EigenSystem hermitian_eig(const Operator& a, double tol = 1e-10) {
    if (!a.is_hermitian(tol))
        throw std::invalid_argument("hermitian_eig: input is not Hermitian within tolerance");
    Matrix sym = 0.5 * (a.entries + a.entries.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eig: eigensolver failed to converge");
    const int n = a.dim();
    EigenSystem out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    (void)n;
    return out;
}

// Matrix logarithm of a positive semi-definite operator with a spectral clamp:
// eigenvalues are clamped to max(lambda, floor) before the scalar log, keeping
// the result bounded on rank-deficient states. Eigenvalues below -1e-10 are an
// error.
inline Operator log_psd(const Operator& a, double floor = 1e-12) {
    if (floor <= 0.0) throw std::invalid_argument("log_psd: floor must be positive");
    EigenSystem es = hermitian_eig(a);
    if (es.values.minCoeff() < -1e-10)
        throw std::invalid_argument("log_psd: eigenvalue below -1e-10, input not PSD");
    RealVector logs(es.values.size());
    for (int i = 0; i < es.values.size(); ++i) logs[i] = std::log(std::max(es.values[i], floor));
    Matrix out = es.vectors * logs.asDiagonal() * es.vectors.adjoint();
    out = 0.5 * (out + out.adjoint().eval());
    return Operator(a.layout, std::move(out));
}

inline void check_same_space(const Operator& a, const Operator& b, const char* what) {
    if (!(a.layout == b.layout))
        throw std::invalid_argument(std::string(what) + ": operator layouts differ");
}

inline Complex expectation(const Operator& rho, const Operator& a) {
    check_same_space(rho, a, "expectation");
    return (rho.entries.transpose().cwiseProduct(a.entries)).sum();  // Tr(rho * a)
}

// Tr(rho a^2) - Tr(rho a)^2 for Hermitian a; tiny negative round-off within
// -1e-12 (relative to the second moment) is clamped to zero.
inline double variance(const Operator& rho, const Operator& a, double herm_tol = 1e-10) {
    check_same_space(rho, a, "variance");
    if (!a.is_hermitian(herm_tol))
        throw std::invalid_argument("variance: observable is not Hermitian");
    const Matrix a_rho = a.entries * rho.entries;
    const double second = (a.entries.transpose().cwiseProduct(a_rho)).sum().real();  // Tr(a a rho)
    const double mean = a_rho.trace().real();
    double var = second - mean * mean;
    const double tol = 1e-12 * std::max(1.0, std::abs(second));
    if (var < -tol)
        throw std::runtime_error("variance: negative beyond round-off tolerance");
    return std::max(var, 0.0);
}

// Operator norm (largest singular value). For Hermitian operators this equals
// the largest eigenvalue modulus.
inline double spectral_norm(const Operator& a) {
    if (a.is_hermitian(1e-10)) {
        EigenSystem es = hermitian_eig(a);
        return es.values.cwiseAbs().maxCoeff();
    }
    Operator gram(a.layout, Matrix(a.entries.adjoint() * a.entries));
    EigenSystem es = hermitian_eig(gram, 1e-8 * std::max(1.0, gram.entries.cwiseAbs().maxCoeff()));
    return std::sqrt(std::max(es.values.maxCoeff(), 0.0));
}

inline Operator commutator(const Operator& a, const Operator& b) {
    check_same_space(a, b, "commutator");
    return Operator(a.layout, a.entries * b.entries - b.entries * a.entries);
}

// Thermal (Gibbs) state exp(-beta H)/Z, computed spectrally with the largest
// Boltzmann weight factored out for stability.
inline Operator thermal_state(const Operator& hamiltonian, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("thermal_state: beta must be positive");
    EigenSystem es = hermitian_eig(hamiltonian);
    const double lambda_min = es.values.minCoeff();
    RealVector weights(es.values.size());
    for (int i = 0; i < es.values.size(); ++i) weights[i] = std::exp(-beta * (es.values[i] - lambda_min));
    weights /= weights.sum();
    Matrix out = es.vectors * weights.asDiagonal() * es.vectors.adjoint();
    out = 0.5 * (out + out.adjoint().eval());
    return Operator(hamiltonian.layout, std::move(out));
}

// log of the partition function Tr exp(-beta H), stable for large beta.
inline double log_partition(const Operator& hamiltonian, double beta) {
    EigenSystem es = hermitian_eig(hamiltonian);
    const double lambda_min = es.values.minCoeff();
    double s = 0.0;
    for (int i = 0; i < es.values.size(); ++i) s += std::exp(-beta * (es.values[i] - lambda_min));
    return -beta * lambda_min + std::log(s);
}

inline bool Operator::is_density(double tol) const {
    if (!is_hermitian(tol)) return false;
    if (std::abs(entries.trace().real() - 1.0) > tol || std::abs(entries.trace().imag()) > tol) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(Matrix(0.5 * (entries + entries.adjoint())),
                                                 Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff() >= -tol;
}

}  // namespace batterybench
