#ifndef JPM_ANALYSIS_HPP
#define JPM_ANALYSIS_HPP

#include <functional>

#include "jpm/model.hpp"

namespace jpm {

/// 4x4 process matrix of a qubit channel, [C]_{(i,j),(k,l)} = <j|E(|i><k|)|l>
/// with row index 2i + j and column index 2k + l. Trace-preserving
/// channels have trace 2.
struct ChoiMatrix {
    Matrix mat; // 4x4

    ChoiMatrix() : mat(Matrix::Zero(4, 4)) {}
    explicit ChoiMatrix(Matrix m) : mat(std::move(m)) {
        if (mat.rows() != 4 || mat.cols() != 4)
            throw DimensionMismatch("ChoiMatrix: expected a 4x4 matrix");
    }

    double hermiticity_defect() const { return (mat - mat.adjoint()).cwiseAbs().maxCoeff(); }
    double trace() const { return mat.trace().real(); }
    double min_eigenvalue() const;

    /// Hermiticity, trace = 2 within 1e-6, PSD within -1e-8.
    void validate(bool trace_preserving = true) const;
};

/// Measurement contrast C = P_bright - P_dark.
double contrast(double p_bright, double p_dark);

/// Combined bright/dark detection model:
/// P = P_B + (1 - P_B) P_D with P_B = 1 - exp(-|alpha|^2 gamma_J/(gamma_J+gamma_R))
/// and P_D = 1 - exp(-gamma_D t_m).
double analytic_detection_probability(double alpha_sq, double gamma_j, double gamma_r,
                                      double gamma_d, double t_m);
double bright_count_probability(double alpha_sq, double gamma_j, double gamma_r);
double dark_count_probability(double gamma_d, double t_m);

/// Pointer-basis dephasing factor exp(-|alpha1 - alpha0|^2): the squared
/// magnitude of the pointer-state overlap, i.e. the squared suppression
/// of the traced qubit coherence.
double dephasing_factor(Complex alpha0, Complex alpha1);

/// Upper incomplete gamma for integer order, by the recurrence
/// G(N, x) = (N-1) G(N-1, x) + x^{N-1} e^{-x}, G(1, x) = e^{-x}.
double upper_incomplete_gamma_int(int n, double x);

/// Probability that at least N photons can be subtracted from |alpha1>:
/// P_N = 1 - Gamma(N, |alpha1|^2) / Gamma(N).
double subtraction_probability(double alpha1_sq, int n);

/// Residual vacuum-overlap error of the displacement reset after N
/// subtraction-operator photon removals. Depends on |alpha1| only.
double reset_error(Complex alpha1, int n);

/// Mean photon number of the normalized state after N subtraction-operator
/// applications to |alpha1>.
double subtracted_mean_photons(double alpha1_sq, int n);

enum class BackactionKind { Subtraction, Lowering };

/// Apply the photon back-action operator N times to a cavity state and
/// renormalize. Subtraction uses B = a n^{-1/2} (coefficient shift);
/// Lowering uses the plain annihilation operator.
QuantumState subtraction_backaction(const QuantumState& cavity, int n,
                                    BackactionKind kind = BackactionKind::Subtraction);

using QubitChannel = std::function<Eigen::Matrix2cd(const Eigen::Matrix2cd&)>;

/// Channel outputs on the four physical probe states |0>, |1>, |+>, |+i>.
struct TomographyOutputs {
    Eigen::Matrix2cd out0, out1, out_plus, out_plus_i;
};

/// Assemble the Choi matrix from physical-state evolutions; the two
/// non-Hermitian matrix units are reconstructed by linearity.
ChoiMatrix choi_from_outputs(const TomographyOutputs& t);

/// Probe a linear channel on the four physical states and assemble.
ChoiMatrix choi_from_channel(const QubitChannel& channel);

/// Choi matrix of perfect projective qubit measurement (unconditional):
/// corner diagonal ones.
ChoiMatrix perfect_qnd_choi();

/// Ideal-limit protocol Choi matrix: corners 1 with off-corner K.
ChoiMatrix ideal_protocol_choi(Complex alpha0, Complex alpha1);

/// Pointer overlap K entering the ideal fidelity.
double ideal_pointer_overlap(Complex alpha0, Complex alpha1);

/// Normalized Choi-matrix fidelity
/// F = (Tr sqrt(sqrt(C1) C2 sqrt(C1)))^2 / (Tr C1 Tr C2).
double process_fidelity(const ChoiMatrix& c1, const ChoiMatrix& c2);

/// Closed-form ideal fidelity F = (1 + sqrt(1 - K^2)) / 2.
double analytic_ideal_fidelity(Complex alpha0, Complex alpha1);

/// Conditional post-measurement qubit states in the ideal-detector limit.
struct ConditionalStates {
    Eigen::Vector2cd no_click; // |psi_0>
    Eigen::Vector2cd click;    // |psi_1>
    double p_no_click;
    double p_click;
    Complex overlap; // <psi_0|psi_1>, the non-orthogonality
};

ConditionalStates conditional_states(Complex a, Complex b, Complex alpha0, Complex alpha1);

/// Cavity- and JPM-mediated qubit lifetime estimates.
struct LifetimeReport {
    int n;                // cavity photon number for the JPM-mediated channel
    double t1_kappa;      // Purcell lifetime through the cavity port
    double t1_gamma_r;    // JPM-mediated lifetime at photon number n
    double rate_kappa;    // underlying rates
    double rate_gamma_r;
    bool dispersive_ok;   // g_q / Delta <= 0.1
};

LifetimeReport qubit_lifetimes(const SystemParams& p, int n);

} // namespace jpm

#endif
