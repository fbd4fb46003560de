#ifndef JPM_PROTOCOL_HPP
#define JPM_PROTOCOL_HPP

#include "jpm/analysis.hpp"
#include "jpm/evolve.hpp"

namespace jpm {

/// Stage timing and drive settings derived from the parameter record.
/// With `optimal_drive`, t_d = pi / chi_Q (the dark pointer returns to
/// vacuum); with `bright_on_one`, the drive sits on the qubit-|1>-dressed
/// cavity resonance w_d = w_C - chi_Q + chi_J.
struct PulseSchedule {
    double t_drive;
    double t_measure;
    double t_reset;
    double drive_amp;   // a0
    double reset_amp;   // a1; filled by the reset stage when 0
    double reset_phase; // phi
    double omega_drive;

    static PulseSchedule from_params(const SystemParams& p, bool optimal_drive = true,
                                     bool bright_on_one = true);

    /// Drive amplitude giving |alpha_1|^2 = photons after t_drive:
    /// a0 = 2 sqrt(photons) / t_d.
    static double amp_for_photons(double photons, double t_drive);
};

/// Output of the drive stage: the entangled cavity-qubit state plus the
/// pointer amplitudes and per-branch diagnostics.
struct DriveStageResult {
    QuantumState state; // cavity (x) qubit
    Complex alpha0, alpha1;
    double branch_fidelity0; // numeric branch state vs the coherent pointer
    double branch_fidelity1;
    std::vector<double> times;
    std::vector<double> occupation0, occupation1; // per-branch <n>(t)
    std::vector<Complex> amplitude0, amplitude1;  // per-branch pointer amplitude (drive-detuning frame)
    Complex a, b;
    CouplingModel mode;
};

/// Per-run outputs across the stages.
struct RunRecord {
    CouplingModel mode = CouplingModel::Dispersive;
    double click_probability = 0.0;

    Eigen::Matrix2cd qubit_given_click = Eigen::Matrix2cd::Zero();
    Eigen::Matrix2cd qubit_given_no_click = Eigen::Matrix2cd::Zero();
    Eigen::Matrix2cd qubit_unconditional = Eigen::Matrix2cd::Zero();

    // measurement-stage traces
    std::vector<double> times;
    std::vector<double> cavity_occupation;
    std::vector<double> jpm_measured;
    std::vector<double> qubit_sz;
    std::vector<Eigen::Matrix2cd> qubit_states; // unconditional reduced qubit vs time

    std::optional<QuantumState> final_state; // cavity (x) qubit (x) JPM after measurement
    // conditional cavity (x) qubit states before reset, for repeated runs
    std::optional<QuantumState> state_given_click;
    std::optional<QuantumState> state_given_no_click;

    // reset stage
    Complex reset_displacement = 0.0; // beta
    double alpham_sq = 0.0;           // |alpha_M|^2 entering beta
    double reset_amp = 0.0;           // a1 with (a1 t_d)/2 = |alpha_M|
    double residual_occupation0 = 0.0, residual_occupation1 = 0.0; // per qubit branch
    double vacuum_infidelity0 = 0.0, vacuum_infidelity1 = 0.0;
    std::optional<QuantumState> post_reset_state; // cavity (x) qubit

    std::optional<DriveStageResult> drive;
    Complex alpha0 = 0.0, alpha1 = 0.0;
};

/// Joint statistics of two back-to-back protocol runs. Index order:
/// p_{ab} with a the second outcome and b the first; p0/p1 are the
/// single-run probabilities.
struct JointStats {
    double p00, p01, p10, p11;
    double p0, p1;
    double sum() const { return p00 + p01 + p10 + p11; }
};

/// Channel tomography of the drive+measurement qubit map, recorded along
/// measurement time.
struct TomographySeries {
    std::vector<double> times;
    std::vector<TomographyOutputs> outputs;
};

/// Map the qubit state onto the cavity pointer states. Dispersive mode
/// integrates the two branch Hamiltonians and checks the branches against
/// the closed-form pointer amplitudes (fidelity > 1 - 1e-6); JC mode
/// integrates the full exchange-coupled system and reports the achieved
/// pointer fidelities without a threshold.
DriveStageResult run_drive_stage(const SystemParams& p, Complex a, Complex b, CouplingModel mode,
                                 const IntegratorConfig& config = {});

/// Closed-form pointer amplitudes at time t for drive amplitude amp:
/// alpha0 = -(amp / 4 chi_Q)(e^{i 2 chi_Q t} - 1), alpha1 = -i amp t / 2.
Complex pointer_alpha0(const SystemParams& p, double amp, double t);
Complex pointer_alpha1(double amp, double t);

/// JPM readout of the pointer: re-attaches the JPM in |g> and integrates
/// the master equation for t_m. Click = measured-level population.
RunRecord run_measurement_stage(const QuantumState& cavity_qubit, const SystemParams& p,
                                double t_m, CouplingModel mode,
                                const IntegratorConfig& config = {});

/// Conditional displacement reset U_r = I (x) |0><0| + D(beta) (x) |1><1|
/// with beta sized from the simulated post-measurement mean photon number
/// of the qubit-|1> branch and phase phi = pi.
RunRecord run_reset_stage(const RunRecord& measured, const SystemParams& p);

/// Drive, measure, reset.
RunRecord run_full_protocol(const SystemParams& p, Complex a, Complex b, CouplingModel mode,
                            const IntegratorConfig& config = {});

/// Full protocol on a mixed qubit input (fresh vacuum cavity).
RunRecord run_full_protocol_density(const SystemParams& p, const Eigen::Matrix2cd& qubit,
                                    CouplingModel mode, const IntegratorConfig& config = {});

/// Full protocol on an arbitrary cavity (x) qubit input state (the drive
/// pulse acts on top of whatever the cavity holds).
RunRecord run_protocol_from_state(const SystemParams& p, const QuantumState& cavity_qubit,
                                  CouplingModel mode, const IntegratorConfig& config = {});

/// Two back-to-back protocol runs. With reset_between, the first run's
/// reset is taken to return the cavity to vacuum and the second run
/// consumes the conditional qubit states; without it, the conditional
/// post-measurement cavity-qubit states feed the second drive directly.
JointStats run_repeated_protocol(const SystemParams& p, Complex a, Complex b, CouplingModel mode,
                                 bool reset_between = true, const IntegratorConfig& config = {});

/// Detection probability of a coherent cavity state at the bright-branch
/// detuning: P(|alpha|^2, t) recorded along the trajectory
/// (jpm_measured of the returned trajectory).
Trajectory detection_probability_trace(const SystemParams& p, double alpha_sq, double t_m,
                                       const IntegratorConfig& config = {});

/// Drive + measurement channel tomography on the four physical probe
/// states, batched through one integration; outputs recorded along t_m.
TomographySeries run_channel_tomography(const SystemParams& p, CouplingModel mode, double t_m,
                                        const IntegratorConfig& config = {});

} // namespace jpm

#endif
