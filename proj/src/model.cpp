#include "jpm/model.hpp"

#include <cmath>

namespace jpm {

void SystemParams::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (v < 0.0) throw ConfigError(std::string("SystemParams: ") + name + " must be nonnegative");
    };
    nonneg(g_q, "g_q");
    nonneg(g_j, "g_j");
    nonneg(gamma_j, "gamma_j");
    nonneg(gamma_d, "gamma_d");
    nonneg(gamma_r, "gamma_r");
    nonneg(kappa, "kappa");
    nonneg(t_drive, "t_drive");
    nonneg(t_measure, "t_measure");
    nonneg(t_reset, "t_reset");
    if (omega_c == omega_q) throw ConfigError("SystemParams: cavity and qubit are degenerate");
}

SystemParams SystemParams::defaults() {
    SystemParams p;
    const double MHz = 2.0 * kPi * 1e6;
    p.omega_c = 6000.0 * MHz;
    p.omega_q = 5000.0 * MHz;
    p.omega_j_idle = 7000.0 * MHz;
    // chi_Q/pi = 10 MHz  <=>  chi_Q = 2 pi * 5 MHz, with Delta = 2 pi * 1 GHz
    p.g_q = std::sqrt(5.0 * 1000.0) * MHz;
    p.g_j = 50.0 * MHz;
    p.gamma_j = 200e6;
    p.gamma_d = 1e6;
    p.gamma_r = 200e6;
    p.kappa = 0.1e6;
    p.cavity_decay = false;
    p.t_drive = 100e-9; // = pi / chi_Q for the parameters above
    p.t_measure = 40e-9;
    p.t_reset = 100e-9;
    // |alpha_1| = a0 t_d / 2 = sqrt(10)
    p.drive_amp = 2.0 * std::sqrt(10.0) / p.t_drive;
    p.drive_phase = kPi;
    p.omega_j_meas = p.omega_c - p.chi_q();
    return p;
}

StageDetunings stage_detunings(const SystemParams& p) {
    const double chi_q = p.chi_q();
    const double chi_j = p.chi_j();
    StageDetunings d;
    // Drive frame at w_d = w_C - chi_Q + chi_J; effective cavity
    // frequency w~_C = w_C + s chi_Q + chi_J with s = +1 for |0>.
    d.cavity_branch0 = 2.0 * chi_q;
    d.cavity_branch1 = 0.0;
    // Measurement stage: bare dispersive cavity (no idle-JPM shift).
    d.cavity_meas0 = 2.0 * chi_q - chi_j;
    d.cavity_meas1 = -chi_j;
    d.jpm_meas = p.omega_j_meas - p.omega_drive();
    // JC drive stage: bare cavity keeps only the idle-JPM shift.
    d.cavity_jc_drive = chi_q; // (w_C + chi_J) - w_d
    d.qubit_jc = p.omega_q - p.omega_drive();
    return d;
}

namespace {

int branch_sign(int qubit_branch) {
    if (qubit_branch != 0 && qubit_branch != 1)
        throw DimensionMismatch("qubit branch must be 0 or 1");
    return qubit_branch == 0 ? +1 : -1;
}

// JPM self term -(w/2) sigma_z^J with sigma_z^J = diag(1,-1,E), E = 0:
// energies (-w/2, +w/2, 0) for (g, e, m).
Matrix jpm_self(double omega_j) { return -0.5 * omega_j * jpm_sigma_z(0.0); }

} // namespace

Operator dispersive_hamiltonian(const SystemParams& p, const HilbertLayout& layout,
                                std::optional<int> qubit_branch) {
    const double chi_q = p.chi_q();
    if (qubit_branch) {
        // Effective cavity form, Eq.-(3) style: w~_C a^dag a on the cavity.
        if (layout.has_qubit())
            throw DimensionMismatch("dispersive_hamiltonian: branch-reduced form wants a cavity-only layout");
        const double omega_eff = p.omega_c + branch_sign(*qubit_branch) * chi_q + p.chi_j();
        Matrix h = omega_eff * number_matrix(layout.n_fock());
        if (layout.has_jpm()) return embed(h, Subsystem::Cavity, layout);
        return {layout, std::move(h)};
    }
    if (!layout.has_qubit())
        throw DimensionMismatch("dispersive_hamiltonian: layout must include the qubit");
    const Matrix num = number_matrix(layout.n_fock());
    const Matrix sz = pauli_z();
    const Matrix id_c = Matrix::Identity(layout.n_fock(), layout.n_fock());
    const Matrix id_q = Matrix::Identity(2, 2);
    Matrix h = p.omega_c * kron(num, id_q) + chi_q * kron(num, sz) -
               0.5 * (p.omega_q - chi_q) * kron(id_c, sz);
    if (layout.has_jpm()) {
        Matrix full = kron(h, Matrix(Matrix::Identity(3, 3)));
        return {layout, std::move(full)};
    }
    return {layout, std::move(h)};
}

namespace {

// Shared assembly for the full three-subsystem Hamiltonian. The
// qubit-cavity term comes in either the dispersive or the exchange form.
Operator assemble_full(const SystemParams& p, const HilbertLayout& layout, double time,
                       Frame frame, CouplingModel coupling) {
    if (!layout.has_qubit() || !layout.has_jpm())
        throw DimensionMismatch("full_hamiltonian: layout must include cavity, qubit and JPM");

    const int nf = layout.n_fock();
    const Matrix a_loc = annihilation_matrix(nf);
    const Matrix a = embed(a_loc, Subsystem::Cavity, layout).mat;
    const Matrix num = embed(Matrix(number_matrix(nf)), Subsystem::Cavity, layout).mat;
    const Matrix sz = embed(pauli_z(), Subsystem::Qubit, layout).mat;
    const Matrix sm = embed(qubit_lower(), Subsystem::Qubit, layout).mat;
    const Matrix jm = embed(jpm_lower(), Subsystem::Jpm, layout).mat;
    const Matrix nj = embed(jpm_project(1), Subsystem::Jpm, layout).mat; // |e><e|

    const bool measuring = time >= p.t_drive && time < p.t_drive + p.t_measure;
    const bool driving = time < p.t_drive;
    const double omega_j = measuring ? p.omega_j_meas : p.omega_j_idle;

    Matrix h;
    if (frame == Frame::Lab) {
        if (coupling == CouplingModel::Dispersive) {
            const double chi_q = p.chi_q();
            h = p.omega_c * num + chi_q * (num * sz) - 0.5 * (p.omega_q - chi_q) * sz;
        } else {
            h = p.omega_c * num - 0.5 * p.omega_q * sz +
                p.g_q * (a * sm.adjoint() + a.adjoint() * sm);
        }
        h += embed(jpm_self(omega_j), Subsystem::Jpm, layout).mat;
        if (driving && p.drive_amp != 0.0) {
            const double amp = p.drive_amp * std::cos(p.omega_drive() * time);
            h += amp * (a + a.adjoint());
        }
    } else {
        // Rotating frame at w_d for cavity, qubit and JPM excitation
        // numbers; only detunings and exchange terms survive.
        const StageDetunings d = stage_detunings(p);
        const double jpm_det = measuring ? d.jpm_meas : (p.omega_j_idle - p.omega_drive());
        const double chi_q = p.chi_q();
        const double chi_j = p.chi_j();
        if (coupling == CouplingModel::Dispersive) {
            // Cavity coefficient (w_C + chi_Q sz) - w_d = (chi_Q - chi_J) + chi_Q sz.
            h = (chi_q - chi_j) * num + chi_q * (num * sz);
            // Qubit rotated at its dressed frequency w_Q - chi_Q: no self term.
        } else {
            // Bare cavity against the drive frame: w_C - w_d = chi_Q - chi_J.
            h = (chi_q - chi_j) * num;
            h += d.qubit_jc * 0.5 * (Matrix::Identity(layout.dim(), layout.dim()) - sz);
            h += p.g_q * (a * sm.adjoint() + a.adjoint() * sm);
        }
        h += jpm_det * nj;
        if (driving && p.drive_amp != 0.0) h += 0.5 * p.drive_amp * (a + a.adjoint());
    }
    h += p.g_j * (a * jm.adjoint() + a.adjoint() * jm);
    // enforce exact Hermiticity of the assembled sum
    h = 0.5 * (h + Matrix(h.adjoint()));
    return {layout, std::move(h)};
}

} // namespace

Operator full_hamiltonian(const SystemParams& p, const HilbertLayout& layout, double time,
                          Frame frame) {
    return assemble_full(p, layout, time, frame, CouplingModel::Dispersive);
}

Operator jaynes_cummings_hamiltonian(const SystemParams& p, const HilbertLayout& layout,
                                     double time, Frame frame) {
    return assemble_full(p, layout, time, frame, CouplingModel::JaynesCummings);
}

DissipatorSet build_dissipators(const SystemParams& p, const HilbertLayout& layout, Stage) {
    DissipatorSet set;
    if (layout.has_jpm()) {
        Matrix bright = Matrix::Zero(3, 3);
        bright(2, 1) = 1; // |m><e|
        Matrix dark = Matrix::Zero(3, 3);
        dark(2, 0) = 1; // |m><g|
        set.push_back({embed(bright, Subsystem::Jpm, layout), p.gamma_j});
        set.push_back({embed(dark, Subsystem::Jpm, layout), p.gamma_d});
        set.push_back({embed(jpm_lower(), Subsystem::Jpm, layout), p.gamma_r});
    }
    if (p.cavity_decay && p.kappa > 0.0)
        set.push_back({embed(annihilation_matrix(layout.n_fock()), Subsystem::Cavity, layout), p.kappa});
    return set;
}

Operator drive_stage_hamiltonian(const SystemParams& p, int qubit_branch, double amp,
                                 const HilbertLayout& layout) {
    if (layout.has_qubit() || layout.has_jpm())
        throw DimensionMismatch("drive_stage_hamiltonian: cavity-only layout expected");
    const StageDetunings d = stage_detunings(p);
    const double det = qubit_branch == 0 ? d.cavity_branch0 : d.cavity_branch1;
    branch_sign(qubit_branch);
    const int nf = layout.n_fock();
    Matrix a = annihilation_matrix(nf);
    Matrix h = det * number_matrix(nf) + 0.5 * amp * (a + a.adjoint());
    return {layout, std::move(h)};
}

Operator measurement_stage_hamiltonian(const SystemParams& p, int qubit_branch,
                                       const HilbertLayout& layout) {
    if (layout.has_qubit() || !layout.has_jpm())
        throw DimensionMismatch("measurement_stage_hamiltonian: cavity (x) JPM layout expected");
    const StageDetunings d = stage_detunings(p);
    const double det = qubit_branch == 0 ? d.cavity_meas0 : d.cavity_meas1;
    branch_sign(qubit_branch);
    const Matrix a = embed(annihilation_matrix(layout.n_fock()), Subsystem::Cavity, layout).mat;
    const Matrix num = embed(Matrix(number_matrix(layout.n_fock())), Subsystem::Cavity, layout).mat;
    const Matrix nj = embed(jpm_project(1), Subsystem::Jpm, layout).mat;
    const Matrix jm = embed(jpm_lower(), Subsystem::Jpm, layout).mat;
    Matrix h = det * num + d.jpm_meas * nj + p.g_j * (a * jm.adjoint() + a.adjoint() * jm);
    h = 0.5 * (h + Matrix(h.adjoint()));
    return {layout, std::move(h)};
}

Operator jc_drive_stage_hamiltonian(const SystemParams& p, double amp,
                                    const HilbertLayout& layout) {
    if (!layout.has_qubit() || layout.has_jpm())
        throw DimensionMismatch("jc_drive_stage_hamiltonian: cavity (x) qubit layout expected");
    const StageDetunings d = stage_detunings(p);
    const Matrix a = embed(annihilation_matrix(layout.n_fock()), Subsystem::Cavity, layout).mat;
    const Matrix num = embed(Matrix(number_matrix(layout.n_fock())), Subsystem::Cavity, layout).mat;
    const Matrix sm = embed(qubit_lower(), Subsystem::Qubit, layout).mat;
    const Matrix nq = 0.5 * (Matrix::Identity(layout.dim(), layout.dim()) -
                             embed(pauli_z(), Subsystem::Qubit, layout).mat);
    Matrix h = d.cavity_jc_drive * num + d.qubit_jc * nq +
               p.g_q * (a * sm.adjoint() + a.adjoint() * sm) + 0.5 * amp * (a + a.adjoint());
    h = 0.5 * (h + Matrix(h.adjoint()));
    return {layout, std::move(h)};
}

Operator jc_measurement_stage_hamiltonian(const SystemParams& p, const HilbertLayout& layout) {
    if (!layout.has_qubit() || !layout.has_jpm())
        throw DimensionMismatch("jc_measurement_stage_hamiltonian: full layout expected");
    const StageDetunings d = stage_detunings(p);
    const double cavity_det = p.chi_q() - p.chi_j(); // w_C - w_d, via chi algebra
    const Matrix a = embed(annihilation_matrix(layout.n_fock()), Subsystem::Cavity, layout).mat;
    const Matrix num = embed(Matrix(number_matrix(layout.n_fock())), Subsystem::Cavity, layout).mat;
    const Matrix sm = embed(qubit_lower(), Subsystem::Qubit, layout).mat;
    const Matrix nq = 0.5 * (Matrix::Identity(layout.dim(), layout.dim()) -
                             embed(pauli_z(), Subsystem::Qubit, layout).mat);
    const Matrix nj = embed(jpm_project(1), Subsystem::Jpm, layout).mat;
    const Matrix jm = embed(jpm_lower(), Subsystem::Jpm, layout).mat;
    Matrix h = cavity_det * num + d.qubit_jc * nq + d.jpm_meas * nj +
               p.g_q * (a * sm.adjoint() + a.adjoint() * sm) +
               p.g_j * (a * jm.adjoint() + a.adjoint() * jm);
    h = 0.5 * (h + Matrix(h.adjoint()));
    return {layout, std::move(h)};
}

} // namespace jpm
