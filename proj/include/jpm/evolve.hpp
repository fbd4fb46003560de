#ifndef JPM_EVOLVE_HPP
#define JPM_EVOLVE_HPP

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "jpm/model.hpp"

namespace jpm {

enum class IntegratorMethod { Rk4Fixed, Rk45Adaptive };

struct IntegratorConfig {
    IntegratorMethod method = IntegratorMethod::Rk4Fixed;
    double dt = 1e-12;      // fixed-step size; also the initial/maximum adaptive step
    double rel_tol = 1e-8;  // adaptive only
    double abs_tol = 1e-12; // adaptive only
    int record_stride = 0;  // steps between records; 0 = every 0.5 ns of simulated time
    bool check_positivity = true;
    double top_fock_tol = 1e-6;
};

/// Time series of states and derived observables along one evolution.
/// Observable arrays are aligned with `times`; fields for absent
/// subsystems stay empty.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> cavity_occupation;
    std::vector<Complex> cavity_amplitude; // <a>
    std::vector<Complex> trace_value;      // complex trace (coherence blocks decay)
    std::vector<double> qubit_sz;
    std::vector<double> jpm_ground;
    std::vector<double> jpm_excited;
    std::vector<double> jpm_measured;
    std::vector<double> trace_real;   // Tr rho, or ||psi||^2 on the pure path
    std::vector<double> min_eigenvalue;
    std::vector<double> hermiticity_drift;
    std::vector<double> top_fock_population;
    std::vector<Eigen::Matrix2cd> qubit_states; // reduced qubit state per record point

    Matrix final_block; // raw final matrix (or ket as a d x 1 block)
    std::optional<QuantumState> final_state;

    const QuantumState& state() const {
        if (!final_state) throw NumericalError("Trajectory: no final state recorded");
        return *final_state;
    }
};

/// Hamiltonian supplier for the integrators. Constant sources enable the
/// precomputed-generator fast path; time-dependent sources are evaluated
/// at every substep.
class HamiltonianSource {
public:
    explicit HamiltonianSource(Operator h) : layout_(h.layout), static_(std::move(h.mat)) {}
    HamiltonianSource(HilbertLayout layout, std::function<Matrix(double)> fn)
        : layout_(layout), fn_(std::move(fn)) {}

    bool constant() const { return !fn_; }
    const HilbertLayout& layout() const { return layout_; }
    const Matrix& static_matrix() const {
        if (fn_) throw NumericalError("HamiltonianSource: source is time-dependent");
        return static_;
    }
    Matrix at(double t) const { return fn_ ? fn_(t) : static_; }

private:
    HilbertLayout layout_;
    Matrix static_;
    std::function<Matrix(double)> fn_;
};

/// Integrate the Lindblad master equation. Pure inputs are promoted to
/// density matrices. The final state satisfies |Tr rho - 1| < 1e-8,
/// min eigenvalue > -1e-8 and Hermiticity drift < 1e-10; a violation
/// mid-run triggers one retry at half the step size before failing with
/// StepSizeError. Top-Fock population beyond the tolerance raises
/// TruncationError.
Trajectory evolve_lindblad(const QuantumState& state, const HamiltonianSource& hamiltonian,
                           const DissipatorSet& dissipators, double duration,
                           const IntegratorConfig& config = {});

/// Integrate the Schrodinger equation for a pure state.
Trajectory evolve_schrodinger(const QuantumState& state, const HamiltonianSource& hamiltonian,
                              double duration, const IntegratorConfig& config = {});

namespace detail {

using SparseGen = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

SparseGen sparse_from_dense(const Matrix& m);

/// Vectorized generator for d/dt X = -i (Hl X - X Hr) + sum_k rate_k
/// (L X L^dag - (L^dag L X + X L^dag L)/2), in the column-major vec
/// convention. Hl = Hr gives the Lindblad Liouvillian; distinct
/// Hamiltonians evolve qubit-coherence blocks of sigma_z-conserving
/// models.
SparseGen lindblad_generator(const Matrix& h_left, const Matrix& h_right,
                             const std::vector<std::pair<Matrix, double>>& channels);

std::vector<std::pair<Matrix, double>> channel_matrices(const DissipatorSet& dissipators);

/// Largest frequency/rate scale of a generator, for the step-size bound
/// dt <= 0.02 / scale.
double generator_scale(const Matrix& h, const DissipatorSet& dissipators);

/// Evolve several d x d blocks under one precomputed generator in a
/// single fused pass (one sparse traversal advances all columns).
/// `physical[i]` marks columns that are genuine density matrices and get
/// the full physicality probes plus periodic re-Hermitization.
std::vector<Trajectory> evolve_generator_batch(const SparseGen& gen, const HilbertLayout& layout,
                                               const std::vector<Matrix>& initial,
                                               const std::vector<bool>& physical, double duration,
                                               const IntegratorConfig& config,
                                               double scale_hint = 0.0);

} // namespace detail

} // namespace jpm

#endif
