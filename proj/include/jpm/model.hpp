#ifndef JPM_MODEL_HPP
#define JPM_MODEL_HPP

#include <optional>
#include <vector>

#include "jpm/hilbert.hpp"

namespace jpm {

/// All frequencies and couplings are angular (rad/s); the tunnelling and
/// decay rates are plain rates (1/s); times are seconds. Configuration
/// files carry per-key unit tags and convert on load.
struct SystemParams {
    double omega_c = 0.0;      // cavity frequency
    double omega_q = 0.0;      // qubit frequency
    double omega_j_idle = 0.0; // JPM frequency while idling (drive/reset)
    double omega_j_meas = 0.0; // JPM frequency during measurement
    double g_q = 0.0;          // qubit-cavity coupling
    double g_j = 0.0;          // cavity-JPM coupling
    double gamma_j = 0.0;      // bright tunnelling rate, |e> -> |m>
    double gamma_d = 0.0;      // dark tunnelling rate,   |g> -> |m>
    double gamma_r = 0.0;      // relaxation rate,        |e> -> |g>
    double kappa = 0.0;        // cavity input decay rate
    bool cavity_decay = false; // include the kappa channel in dissipator sets
    double drive_amp = 0.0;    // a0, drive stage
    double drive_phase = 0.0;  // phi, reset stage
    double t_drive = 0.0;      // t_d
    double t_measure = 0.0;    // t_m
    double t_reset = 0.0;      // t_r

    /// chi_Q = g_q^2 / (omega_c - omega_q). Single definition site.
    double chi_q() const { return g_q * g_q / (omega_c - omega_q); }
    /// chi_J = g_j^2 / (omega_c - omega_j_idle). Negative for a
    /// blue-detuned idling JPM.
    double chi_j() const { return g_j * g_j / (omega_c - omega_j_idle); }
    double detuning() const { return omega_c - omega_q; }

    /// Drive frequency for the bright-on-one convention:
    /// resonant with the cavity dressed by qubit |1> and the idling JPM.
    double omega_drive() const { return omega_c - chi_q() + chi_j(); }

    /// Ratio |omega_c - omega_q| / g_q >= 10 is required for the
    /// dispersive model to be trustworthy.
    bool dispersive_valid() const { return std::abs(detuning()) >= 10.0 * g_q; }

    /// Throws ConfigError on negative rates/couplings.
    void validate() const;

    /// Paper operating point: 6 GHz cavity, 5 GHz qubit, chi_Q/pi = 10 MHz,
    /// g_J/2pi = 50 MHz, gamma_J = 200 MHz, gamma_D = 1 MHz, gamma_R = 200 MHz,
    /// JPM idling 1 GHz above the cavity, drive sized for |alpha_1|^2 = 10
    /// over t_d = 100 ns.
    static SystemParams defaults();
};

/// One Lindblad channel: a jump operator and its rate.
struct Dissipator {
    Operator jump;
    double rate;
};

using DissipatorSet = std::vector<Dissipator>;

enum class Stage { Drive, Measure, Reset };
enum class Frame { Lab, RotatingAtDrive };
enum class CouplingModel { Dispersive, JaynesCummings };

/// Static detunings of each stage's rotating-frame Hamiltonian, computed
/// from the chi algebra so that exactly-resonant configurations stay
/// exactly resonant in floating point.
struct StageDetunings {
    double cavity_branch0;  // drive/reset stage, qubit |0>:  2 chi_Q
    double cavity_branch1;  // drive/reset stage, qubit |1>:  0
    double cavity_meas0;    // measurement stage, qubit |0>:  2 chi_Q - chi_J
    double cavity_meas1;    // measurement stage, qubit |1>:  -chi_J
    double jpm_meas;        // measurement stage JPM:  omega_j_meas - omega_drive
    double cavity_jc_drive; // JC drive stage, bare cavity + idle-JPM shift vs drive
    double qubit_jc;        // JC modes, qubit vs drive frame
};

StageDetunings stage_detunings(const SystemParams& p);

/// Eq.-style dispersive Hamiltonian on cavity (x) qubit (lab frame):
/// (w_C + chi_Q sz) a^dag a - (w_Q - chi_Q)/2 sz. With a branch fixed it
/// reduces to the effective cavity form w~_C a^dag a on a cavity-only
/// layout, w~_C = w_C +/- chi_Q + chi_J.
Operator dispersive_hamiltonian(const SystemParams& p, const HilbertLayout& layout,
                                std::optional<int> qubit_branch = std::nullopt);

/// Full system Hamiltonian on cavity (x) qubit (x) JPM. In the lab frame
/// the drive is A(t) (a + a^dag) with A = a0 cos(w_d t) during the drive
/// stage; in the rotating frame (at w_d for every factor) the drive takes
/// its rotating-wave form (a0/2)(a + a^dag) and the Hamiltonian is static
/// within each stage. The stage is selected by `time` against the
/// schedule boundaries t_d, t_d + t_m.
Operator full_hamiltonian(const SystemParams& p, const HilbertLayout& layout, double time,
                          Frame frame);

/// As full_hamiltonian but with the exact exchange coupling
/// g_q (a sigma+ + a^dag sigma-) in place of the dispersive qubit term.
Operator jaynes_cummings_hamiltonian(const SystemParams& p, const HilbertLayout& layout,
                                     double time = 0.0, Frame frame = Frame::Lab);

/// The three JPM channels (bright |m><e| at gamma_J, dark |m><g| at
/// gamma_D, relaxation |g><e| at gamma_R) whenever the layout includes
/// the JPM, plus the cavity kappa channel when enabled.
DissipatorSet build_dissipators(const SystemParams& p, const HilbertLayout& layout, Stage stage);

// Stage Hamiltonians in the rotating frame used for time evolution.
// Cavity and JPM rotate at the drive frequency; the qubit frame depends
// on the coupling model (see protocol).

/// Drive/reset-stage cavity Hamiltonian for a fixed qubit branch:
/// delta_b a^dag a + (amp/2)(a + a^dag), on a cavity-only layout.
Operator drive_stage_hamiltonian(const SystemParams& p, int qubit_branch, double amp,
                                 const HilbertLayout& layout);

/// Measurement-stage Hamiltonian for a fixed qubit branch on a
/// cavity (x) JPM layout (dispersive mode, qubit rotated away).
Operator measurement_stage_hamiltonian(const SystemParams& p, int qubit_branch,
                                       const HilbertLayout& layout);

/// JC drive-stage Hamiltonian on cavity (x) qubit: cavity and qubit
/// detuned against the drive frame, exchange coupling, RWA drive.
Operator jc_drive_stage_hamiltonian(const SystemParams& p, double amp,
                                    const HilbertLayout& layout);

/// JC measurement-stage Hamiltonian on the full layout.
Operator jc_measurement_stage_hamiltonian(const SystemParams& p, const HilbertLayout& layout);

} // namespace jpm

#endif
