#ifndef JPM_HILBERT_HPP
#define JPM_HILBERT_HPP

#include <complex>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "jpm/errors.hpp"

namespace jpm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

constexpr double kPi = 3.14159265358979323846;

enum class Subsystem { Cavity, Qubit, Jpm };

/// Fixed tensor-product structure: cavity (n_fock levels) x qubit (2) x
/// JPM (3, levels g/e/m), in that order. Factors can be omitted; all
/// operators and states built against the same layout agree on dimension.
class HilbertLayout {
public:
    HilbertLayout(int n_fock, bool include_qubit, bool include_jpm)
        : n_fock_(n_fock), has_qubit_(include_qubit), has_jpm_(include_jpm) {
        if (n_fock < 1) throw DimensionMismatch("HilbertLayout: n_fock must be >= 1");
    }

    static HilbertLayout cavity_only(int n_fock) { return {n_fock, false, false}; }
    static HilbertLayout cavity_qubit(int n_fock) { return {n_fock, true, false}; }
    static HilbertLayout cavity_jpm(int n_fock) { return {n_fock, false, true}; }
    static HilbertLayout full(int n_fock) { return {n_fock, true, true}; }

    int n_fock() const { return n_fock_; }
    bool has_qubit() const { return has_qubit_; }
    bool has_jpm() const { return has_jpm_; }

    int dim() const { return n_fock_ * (has_qubit_ ? 2 : 1) * (has_jpm_ ? 3 : 1); }

    int subsystem_dim(Subsystem s) const {
        switch (s) {
            case Subsystem::Cavity: return n_fock_;
            case Subsystem::Qubit: return has_qubit_ ? 2 : 0;
            case Subsystem::Jpm: return has_jpm_ ? 3 : 0;
        }
        return 0;
    }

    bool contains(Subsystem s) const { return subsystem_dim(s) > 0; }

    bool operator==(const HilbertLayout& o) const {
        return n_fock_ == o.n_fock_ && has_qubit_ == o.has_qubit_ && has_jpm_ == o.has_jpm_;
    }
    bool operator!=(const HilbertLayout& o) const { return !(*this == o); }

    /// Flat index of the basis state |n, q, j>.
    int index(int n, int q = 0, int j = 0) const {
        int idx = n;
        if (has_qubit_) idx = idx * 2 + q;
        if (has_jpm_) idx = idx * 3 + j;
        return idx;
    }

private:
    int n_fock_;
    bool has_qubit_;
    bool has_jpm_;
};

/// Dense operator bound to a layout. Plain value type; the matrix is
/// freely accessible for Eigen expressions.
struct Operator {
    HilbertLayout layout;
    Matrix mat;

    Operator(HilbertLayout lay, Matrix m) : layout(lay), mat(std::move(m)) {
        if (mat.rows() != layout.dim() || mat.cols() != layout.dim())
            throw DimensionMismatch("Operator: matrix does not match layout dimension");
    }

    int dim() const { return layout.dim(); }

    Operator adjoint() const { return {layout, mat.adjoint()}; }

    /// max |M - M^dag| entry; asserted Hermiticity uses tolerance 1e-12.
    double hermiticity_defect() const { return (mat - mat.adjoint()).cwiseAbs().maxCoeff(); }
    bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect() <= tol; }
};

/// Pure ket or density matrix on a layout.
class QuantumState {
public:
    static QuantumState pure(HilbertLayout lay, Vector psi);
    static QuantumState density(HilbertLayout lay, Matrix rho);

    const HilbertLayout& layout() const { return layout_; }
    bool is_pure() const { return pure_; }
    int dim() const { return layout_.dim(); }

    const Vector& ket() const;
    const Matrix& rho() const;

    /// Density-matrix view regardless of representation.
    Matrix density_matrix() const;

    /// Promote to a density-matrix state.
    QuantumState to_density() const;

    /// <A> for an operator on the same layout.
    Complex expectation(const Matrix& op) const;

    double norm_error() const;     // pure: | ||psi||^2 - 1 |, density: |Tr rho - 1|
    double hermiticity_defect() const;
    double min_eigenvalue() const; // of (rho + rho^dag)/2; pure states return 0

    /// Checks the representation invariants; throws NumericalError on failure.
    void validate() const;

private:
    QuantumState(HilbertLayout lay, Vector psi) : layout_(lay), pure_(true), psi_(std::move(psi)) {}
    QuantumState(HilbertLayout lay, Matrix rho) : layout_(lay), pure_(false), rho_(std::move(rho)) {}

    HilbertLayout layout_;
    bool pure_;
    Vector psi_;
    Matrix rho_;
};

// --- elementary operators (cavity) ---

/// a|n> = sqrt(n)|n-1> on a bare n_fock-dimensional cavity.
Matrix annihilation_matrix(int n_fock);
Matrix number_matrix(int n_fock);

/// Truncated coherent state |alpha> as a cavity-only pure state.
/// Requires n_fock >= |alpha|^2 + 6|alpha| + 10 and pre-normalization
/// leakage below 1e-8.
QuantumState coherent_state(Complex alpha, int n_fock);

/// Minimum adequate cavity truncation for amplitudes up to |alpha_max|:
/// ceil(|alpha|^2 + 6 |alpha| + 10).
int required_fock_dim(double alpha_max_abs);

/// Displacement operator D(beta) on a bare cavity, via matrix exponential
/// of beta a^dag - beta* a. Unitary on the low-energy subspace.
Operator displacement(Complex beta, int n_fock);

// --- elementary operators (qubit, JPM) ---

Matrix pauli_z(); // diag(+1, -1) in the basis {|0>, |1>}
Matrix pauli_x();
Matrix pauli_y();
Matrix qubit_lower(); // |0><1|

/// JPM basis order {g, e, m}.
Matrix jpm_sigma_z(double measured_energy = 0.0); // diag(1, -1, E)
Matrix jpm_lower();                               // |g><e|
Matrix jpm_raise();                               // |e><g|
Matrix jpm_project(int level);                    // |level><level|

// --- composition ---

/// Kronecker product, A (x) B, for dense complex matrices.
template <typename DerivedA, typename DerivedB>
Matrix kron(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Embed a single-subsystem operator into the layout's tensor product,
/// identity on the other factors.
Operator embed(const Matrix& local_op, Subsystem where, const HilbertLayout& layout);

/// Tensor product of per-subsystem kets in layout order. Omitted factors
/// must not be supplied.
QuantumState product_state(const HilbertLayout& layout, const Vector& cavity,
                           const std::optional<Vector>& qubit = std::nullopt,
                           const std::optional<Vector>& jpm = std::nullopt);

/// Partial trace keeping only `keep`; returns the reduced density matrix.
Matrix partial_trace(const QuantumState& state, Subsystem keep);
Matrix partial_trace(const Matrix& rho, const HilbertLayout& layout, Subsystem keep);

/// Trace out one subsystem of a density matrix, keeping the rest.
Matrix trace_out(const Matrix& rho, const HilbertLayout& layout, Subsystem drop);

/// Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
/// For pure states this reduces to |<psi|phi>|^2.
double state_fidelity(const QuantumState& a, const QuantumState& b);
double state_fidelity(const Matrix& rho, const Matrix& sigma);

/// Hermitian PSD matrix square root with eigenvalue clamping in
/// [-1e-8, 0) and rejection below -1e-8.
Matrix psd_sqrt(const Matrix& m, double neg_tol = 1e-8);

} // namespace jpm

#endif
