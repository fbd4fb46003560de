#include "jpm/hilbert.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace jpm {

// --- QuantumState ---

QuantumState QuantumState::pure(HilbertLayout lay, Vector psi) {
    if (psi.size() != lay.dim())
        throw DimensionMismatch("QuantumState::pure: vector does not match layout");
    QuantumState s(lay, std::move(psi));
    s.validate();
    return s;
}

QuantumState QuantumState::density(HilbertLayout lay, Matrix rho) {
    if (rho.rows() != lay.dim() || rho.cols() != lay.dim())
        throw DimensionMismatch("QuantumState::density: matrix does not match layout");
    QuantumState s(lay, std::move(rho));
    s.validate();
    return s;
}

const Vector& QuantumState::ket() const {
    if (!pure_) throw NumericalError("QuantumState::ket: state is a density matrix");
    return psi_;
}

const Matrix& QuantumState::rho() const {
    if (pure_) throw NumericalError("QuantumState::rho: state is pure; use density_matrix()");
    return rho_;
}

Matrix QuantumState::density_matrix() const {
    if (pure_) return psi_ * psi_.adjoint();
    return rho_;
}

QuantumState QuantumState::to_density() const {
    if (!pure_) return *this;
    return QuantumState(layout_, Matrix(psi_ * psi_.adjoint()));
}

Complex QuantumState::expectation(const Matrix& op) const {
    if (op.rows() != dim() || op.cols() != dim())
        throw DimensionMismatch("QuantumState::expectation: operator dimension mismatch");
    if (pure_) return psi_.dot(op * psi_); // Eigen dot conjugates the left argument
    return (op * rho_).trace();
}

double QuantumState::norm_error() const {
    if (pure_) return std::abs(psi_.squaredNorm() - 1.0);
    return std::abs(rho_.trace().real() - 1.0) + std::abs(rho_.trace().imag());
}

double QuantumState::hermiticity_defect() const {
    if (pure_) return 0.0;
    return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
}

double QuantumState::min_eigenvalue() const {
    if (pure_) return 0.0;
    Matrix sym = 0.5 * (rho_ + rho_.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void QuantumState::validate() const {
    if (pure_) {
        if (std::abs(psi_.squaredNorm() - 1.0) > 1e-10)
            throw NumericalError("QuantumState: pure state norm violates ||psi||^2 = 1 within 1e-10");
        return;
    }
    if (hermiticity_defect() > 1e-10)
        throw NumericalError("QuantumState: density matrix not Hermitian within 1e-10");
    if (std::abs(rho_.trace().real() - 1.0) > 1e-8)
        throw NumericalError("QuantumState: density matrix trace deviates from 1 beyond 1e-8");
    if (min_eigenvalue() < -1e-8)
        throw NumericalError("QuantumState: density matrix eigenvalue below -1e-8");
}

// --- cavity operators ---

Matrix annihilation_matrix(int n_fock) {
    Matrix a = Matrix::Zero(n_fock, n_fock);
    for (int n = 1; n < n_fock; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

Matrix number_matrix(int n_fock) {
    Matrix n = Matrix::Zero(n_fock, n_fock);
    for (int k = 0; k < n_fock; ++k) n(k, k) = double(k);
    return n;
}

int required_fock_dim(double alpha_max_abs) {
    return int(std::ceil(alpha_max_abs * alpha_max_abs + 6.0 * alpha_max_abs + 10.0));
}

QuantumState coherent_state(Complex alpha, int n_fock) {
    const double a2 = std::norm(alpha);
    const double aa = std::abs(alpha);
    if (n_fock < a2 + 6.0 * aa + 10.0)
        throw TruncationError("coherent_state: n_fock below the truncation rule for |alpha| = " +
                              std::to_string(aa));
    Vector c(n_fock);
    // c_n = e^{-|a|^2/2} a^n / sqrt(n!), built by recurrence
    c(0) = std::exp(-0.5 * a2);
    for (int n = 1; n < n_fock; ++n) c(n) = c(n - 1) * alpha / std::sqrt(double(n));
    const double captured = c.squaredNorm();
    if (1.0 - captured > 1e-8)
        throw TruncationError("coherent_state: truncation leakage " + std::to_string(1.0 - captured) +
                              " exceeds 1e-8");
    c /= std::sqrt(captured);
    return QuantumState::pure(HilbertLayout::cavity_only(n_fock), std::move(c));
}

Operator displacement(Complex beta, int n_fock) {
    const double bb = std::abs(beta);
    if (beta != Complex(0.0, 0.0) && n_fock < std::norm(beta) + 6.0 * bb + 10.0)
        throw TruncationError("displacement: n_fock below the truncation rule for |beta| = " +
                              std::to_string(bb));
    HilbertLayout lay = HilbertLayout::cavity_only(n_fock);
    if (beta == Complex(0.0, 0.0)) return {lay, Matrix::Identity(n_fock, n_fock)};
    Matrix a = annihilation_matrix(n_fock);
    Matrix gen = beta * a.adjoint() - std::conj(beta) * a; // anti-Hermitian
    // exp via the eigendecomposition of the Hermitian matrix i*gen
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(Complex(0, 1) * gen));
    Vector phases(n_fock);
    for (int k = 0; k < n_fock; ++k) phases(k) = std::exp(Complex(0, -1) * es.eigenvalues()(k));
    Matrix d = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    return {lay, std::move(d)};
}

// --- qubit / JPM operators ---

Matrix pauli_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Matrix pauli_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Matrix pauli_y() {
    Matrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}

Matrix qubit_lower() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1;
    return m;
}

Matrix jpm_sigma_z(double measured_energy) {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 1;
    m(1, 1) = -1;
    m(2, 2) = measured_energy;
    return m;
}

Matrix jpm_lower() {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 1) = 1; // |g><e|
    return m;
}

Matrix jpm_raise() {
    Matrix m = Matrix::Zero(3, 3);
    m(1, 0) = 1; // |e><g|
    return m;
}

Matrix jpm_project(int level) {
    if (level < 0 || level > 2) throw DimensionMismatch("jpm_project: level out of range");
    Matrix m = Matrix::Zero(3, 3);
    m(level, level) = 1;
    return m;
}

// --- composition ---

Operator embed(const Matrix& local_op, Subsystem where, const HilbertLayout& layout) {
    const int local_dim = layout.subsystem_dim(where);
    if (local_dim == 0)
        throw DimensionMismatch("embed: layout does not contain the requested subsystem");
    if (local_op.rows() != local_dim || local_op.cols() != local_dim)
        throw DimensionMismatch("embed: local operator dimension does not match subsystem");

    Matrix m = Matrix::Identity(1, 1);
    auto extend = [&](Subsystem s, int dim) {
        if (dim == 0) return;
        if (s == where)
            m = kron(m, local_op);
        else
            m = kron(m, Matrix(Matrix::Identity(dim, dim)));
    };
    extend(Subsystem::Cavity, layout.n_fock());
    extend(Subsystem::Qubit, layout.subsystem_dim(Subsystem::Qubit));
    extend(Subsystem::Jpm, layout.subsystem_dim(Subsystem::Jpm));
    return {layout, std::move(m)};
}

QuantumState product_state(const HilbertLayout& layout, const Vector& cavity,
                           const std::optional<Vector>& qubit, const std::optional<Vector>& jpm) {
    if (cavity.size() != layout.n_fock())
        throw DimensionMismatch("product_state: cavity ket dimension mismatch");
    if (layout.has_qubit() != qubit.has_value() || layout.has_jpm() != jpm.has_value())
        throw DimensionMismatch("product_state: supplied factors do not match layout");
    Vector psi = cavity;
    if (qubit) {
        if (qubit->size() != 2) throw DimensionMismatch("product_state: qubit ket must have dim 2");
        psi = kron(psi, *qubit);
    }
    if (jpm) {
        if (jpm->size() != 3) throw DimensionMismatch("product_state: JPM ket must have dim 3");
        psi = kron(psi, *jpm);
    }
    psi /= psi.norm();
    return QuantumState::pure(layout, std::move(psi));
}

namespace {

// Dimensions of the layout factors in order, 1 for absent factors.
struct Dims {
    int nc, nq, nj;
};

Dims layout_dims(const HilbertLayout& lay) {
    return {lay.n_fock(), lay.has_qubit() ? 2 : 1, lay.has_jpm() ? 3 : 1};
}

} // namespace

Matrix partial_trace(const Matrix& rho, const HilbertLayout& layout, Subsystem keep) {
    if (!layout.contains(keep))
        throw DimensionMismatch("partial_trace: layout does not contain the kept subsystem");
    const Dims d = layout_dims(layout);
    const int dk = layout.subsystem_dim(keep);
    Matrix out = Matrix::Zero(dk, dk);
    auto pick = [&](int c, int q, int j) {
        switch (keep) {
            case Subsystem::Cavity: return c;
            case Subsystem::Qubit: return q;
            default: return j;
        }
    };
    for (int c = 0; c < d.nc; ++c)
        for (int q = 0; q < d.nq; ++q)
            for (int j = 0; j < d.nj; ++j) {
                const int row = (c * d.nq + q) * d.nj + j;
                for (int c2 = 0; c2 < d.nc; ++c2)
                    for (int q2 = 0; q2 < d.nq; ++q2)
                        for (int j2 = 0; j2 < d.nj; ++j2) {
                            // traced indices must coincide
                            if (keep != Subsystem::Cavity && c2 != c) continue;
                            if (keep != Subsystem::Qubit && q2 != q) continue;
                            if (keep != Subsystem::Jpm && j2 != j) continue;
                            const int col = (c2 * d.nq + q2) * d.nj + j2;
                            out(pick(c, q, j), pick(c2, q2, j2)) += rho(row, col);
                        }
            }
    return out;
}

Matrix partial_trace(const QuantumState& state, Subsystem keep) {
    return partial_trace(state.density_matrix(), state.layout(), keep);
}

Matrix trace_out(const Matrix& rho, const HilbertLayout& layout, Subsystem drop) {
    if (!layout.contains(drop))
        throw DimensionMismatch("trace_out: layout does not contain the dropped subsystem");
    const Dims d = layout_dims(layout);
    const int dd = layout.subsystem_dim(drop);
    const int dout = layout.dim() / dd;
    Matrix out = Matrix::Zero(dout, dout);
    auto split = [&](int flat, int& c, int& q, int& j) {
        j = flat % d.nj;
        q = (flat / d.nj) % d.nq;
        c = flat / (d.nj * d.nq);
    };
    auto reduced_index = [&](int c, int q, int j) {
        switch (drop) {
            case Subsystem::Cavity: return q * d.nj + j;
            case Subsystem::Qubit: return c * d.nj + j;
            default: return c * d.nq + q;
        }
    };
    auto dropped_index = [&](int c, int q, int j) {
        switch (drop) {
            case Subsystem::Cavity: return c;
            case Subsystem::Qubit: return q;
            default: return j;
        }
    };
    const int dim = layout.dim();
    for (int r = 0; r < dim; ++r) {
        int c, q, j;
        split(r, c, q, j);
        for (int s = 0; s < dim; ++s) {
            int c2, q2, j2;
            split(s, c2, q2, j2);
            if (dropped_index(c, q, j) != dropped_index(c2, q2, j2)) continue;
            out(reduced_index(c, q, j), reduced_index(c2, q2, j2)) += rho(r, s);
        }
    }
    return out;
}

Matrix psd_sqrt(const Matrix& m, double neg_tol) {
    Matrix sym = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) < -neg_tol)
            throw NumericalError("psd_sqrt: eigenvalue " + std::to_string(ev(i)) +
                                 " below -" + std::to_string(neg_tol));
        if (ev(i) < 0.0) ev(i) = 0.0;
    }
    Vector sq(ev.size());
    for (int i = 0; i < ev.size(); ++i) sq(i) = std::sqrt(ev(i));
    return es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().adjoint();
}

double state_fidelity(const Matrix& rho, const Matrix& sigma) {
    Matrix sr = psd_sqrt(rho);
    Matrix inner = psd_sqrt(sr * sigma * sr);
    const double tr = inner.trace().real();
    return tr * tr;
}

double state_fidelity(const QuantumState& a, const QuantumState& b) {
    if (a.layout() != b.layout())
        throw DimensionMismatch("state_fidelity: states live on different layouts");
    if (a.is_pure() && b.is_pure()) {
        const Complex ov = a.ket().dot(b.ket());
        return std::norm(ov);
    }
    if (a.is_pure()) return b.expectation(a.density_matrix()).real();
    if (b.is_pure()) return a.expectation(b.density_matrix()).real();
    return state_fidelity(a.rho(), b.rho());
}

} // namespace jpm
