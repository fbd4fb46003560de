#include "jpm/protocol.hpp"

#include <cmath>

namespace jpm {

PulseSchedule PulseSchedule::from_params(const SystemParams& p, bool optimal_drive,
                                         bool bright_on_one) {
    PulseSchedule s;
    s.t_drive = optimal_drive ? kPi / p.chi_q() : p.t_drive;
    s.t_measure = p.t_measure;
    s.t_reset = p.t_reset;
    s.drive_amp = p.drive_amp;
    s.reset_amp = 0.0;
    s.reset_phase = p.drive_phase;
    s.omega_drive = bright_on_one ? p.omega_drive() : p.omega_c;
    return s;
}

double PulseSchedule::amp_for_photons(double photons, double t_drive) {
    return 2.0 * std::sqrt(photons) / t_drive;
}

Complex pointer_alpha0(const SystemParams& p, double amp, double t) {
    const double chi = p.chi_q();
    if (chi == 0.0) return pointer_alpha1(amp, t);
    const Complex phase = std::exp(Complex(0.0, 2.0 * chi * t));
    return -(amp / (4.0 * chi)) * (phase - 1.0);
}

Complex pointer_alpha1(double amp, double t) { return Complex(0.0, -0.5 * amp * t); }

namespace {

const Complex kI(0.0, 1.0);

// Dynamical phase of the detuned (qubit-|0>) branch under the square
// drive pulse: exp(i phi0) multiplies the branch coherent state.
double branch0_drive_phase(double amp, double chi_q, double t) {
    const double eps = 0.5 * amp;
    const double delta = 2.0 * chi_q;
    if (std::abs(delta * t) < 1e-8) return eps * eps * delta * t * t * t / 6.0;
    return (eps * eps / delta) * (t - std::sin(delta * t) / delta);
}

// Qubit-frame conversion: the drive-frame solution maps to the frame
// rotating at the dressed qubit frequency w_Q - chi_Q via a phase
// exp(i theta) on |1>, theta = (w_Q - chi_Q - w_d) t = -(Delta + chi_J) t.
double jc_frame_phase(const SystemParams& p, double t) {
    return -(p.detuning() + p.chi_j()) * t;
}

void unwind_qubit_matrix(Eigen::Matrix2cd& rq, double theta) {
    const Complex u = std::exp(kI * theta);
    rq(0, 1) *= std::conj(u);
    rq(1, 0) *= u;
}

// Apply the diagonal qubit gate diag(e^{i th0}, e^{i th1}) to a state on
// any layout containing the qubit.
Matrix apply_qubit_phases(const Matrix& rho, const HilbertLayout& lay, double th0, double th1) {
    const int nj = lay.has_jpm() ? 3 : 1;
    const Complex u[2] = {std::exp(kI * th0), std::exp(kI * th1)};
    Matrix out = rho;
    const int dim = lay.dim();
    for (int r = 0; r < dim; ++r) {
        const int qr = (r / nj) % 2;
        for (int c = 0; c < dim; ++c) {
            const int qc = (c / nj) % 2;
            out(r, c) *= u[qr] * std::conj(u[qc]);
        }
    }
    return out;
}

Vector apply_qubit_phases(const Vector& psi, const HilbertLayout& lay, double th0, double th1) {
    const int nj = lay.has_jpm() ? 3 : 1;
    const Complex u[2] = {std::exp(kI * th0), std::exp(kI * th1)};
    Vector out = psi;
    for (int r = 0; r < psi.size(); ++r) out(r) *= u[(r / nj) % 2];
    return out;
}

struct BranchDrive {
    int n_fock;
    Vector ket0, ket1; // drive-frame branch states at t_d, branch-0 phase unwound
    std::vector<double> times, occ0, occ1;
    std::vector<Complex> amp0, amp1;
    double fid0, fid1;
    Complex alpha0, alpha1; // closed-form pointer amplitudes at t_d
};

int drive_fock_dim(const SystemParams& p, double amp, double t_d) {
    const double a1 = 0.5 * std::abs(amp) * t_d;
    const double chi = p.chi_q();
    const double a0max = chi != 0.0 ? std::abs(amp) / (2.0 * chi) : a1;
    return required_fock_dim(std::max(a1, a0max));
}

BranchDrive drive_branches(const SystemParams& p, double amp, double t_d,
                           const IntegratorConfig& cfg) {
    BranchDrive out;
    out.n_fock = drive_fock_dim(p, amp, t_d);
    const HilbertLayout lay = HilbertLayout::cavity_only(out.n_fock);
    Vector vac = Vector::Zero(out.n_fock);
    vac(0) = 1.0;
    const QuantumState start = QuantumState::pure(lay, vac);
    const StageDetunings det = stage_detunings(p);

    const Trajectory t0 = evolve_schrodinger(
        start, HamiltonianSource(drive_stage_hamiltonian(p, 0, amp, lay)), t_d, cfg);
    const Trajectory t1 = evolve_schrodinger(
        start, HamiltonianSource(drive_stage_hamiltonian(p, 1, amp, lay)), t_d, cfg);

    out.times = t0.times;
    out.occ0 = t0.cavity_occupation;
    out.occ1 = t1.cavity_occupation;
    out.amp0.reserve(t0.times.size());
    out.amp1 = t1.cavity_amplitude;
    for (size_t i = 0; i < t0.times.size(); ++i)
        out.amp0.push_back(std::exp(kI * det.cavity_branch0 * t0.times[i]) *
                           t0.cavity_amplitude[i]);

    const double phi0 = branch0_drive_phase(amp, p.chi_q(), t_d);
    out.ket0 = std::exp(-kI * phi0) * t0.state().ket();
    out.ket1 = t1.state().ket();

    out.alpha0 = pointer_alpha0(p, amp, t_d);
    out.alpha1 = pointer_alpha1(amp, t_d);
    // Targets in the drive frame: alpha_d(t) = e^{-i delta t} alpha(t).
    const Complex a0_frame = std::exp(-kI * det.cavity_branch0 * t_d) * out.alpha0;
    const Vector tgt0 = coherent_state(a0_frame, out.n_fock).ket();
    const Vector tgt1 = coherent_state(out.alpha1, out.n_fock).ket();
    out.fid0 = std::norm(tgt0.dot(out.ket0));
    out.fid1 = std::norm(tgt1.dot(out.ket1));
    return out;
}

// sigma_z blocks of a cavity (x) qubit state: cavity matrices with the
// qubit weights folded in (Tr b00 = w0).
struct Blocks {
    int n_fock = 0;
    bool with_jpm = false;
    Matrix b00, b01, b11; // b10 = b01^dag
    bool has01 = false;

    HilbertLayout layout() const {
        return with_jpm ? HilbertLayout::cavity_jpm(n_fock) : HilbertLayout::cavity_only(n_fock);
    }
    int block_dim() const { return n_fock * (with_jpm ? 3 : 1); }
};

Blocks blocks_from_state(const QuantumState& cq) {
    if (!cq.layout().has_qubit() || cq.layout().has_jpm())
        throw DimensionMismatch("protocol: cavity (x) qubit state expected");
    Blocks blk;
    blk.n_fock = cq.layout().n_fock();
    const int nf = blk.n_fock;
    blk.b00 = Matrix::Zero(nf, nf);
    blk.b01 = Matrix::Zero(nf, nf);
    blk.b11 = Matrix::Zero(nf, nf);
    const Matrix rho = cq.density_matrix();
    for (int n = 0; n < nf; ++n)
        for (int m = 0; m < nf; ++m) {
            blk.b00(n, m) = rho(2 * n + 0, 2 * m + 0);
            blk.b01(n, m) = rho(2 * n + 0, 2 * m + 1);
            blk.b11(n, m) = rho(2 * n + 1, 2 * m + 1);
        }
    blk.has01 = blk.b01.cwiseAbs().maxCoeff() > 1e-300;
    return blk;
}

Blocks blocks_from_branches(const Eigen::Matrix2cd& qubit, const Vector& v0, const Vector& v1) {
    Blocks blk;
    blk.n_fock = int(v0.size());
    blk.b00 = qubit(0, 0) * (v0 * v0.adjoint());
    blk.b01 = qubit(0, 1) * (v0 * v1.adjoint());
    blk.b11 = qubit(1, 1) * (v1 * v1.adjoint());
    blk.has01 = std::abs(qubit(0, 1)) > 1e-300;
    return blk;
}

void attach_jpm_ground(Blocks& blk) {
    const Matrix pg = jpm_project(0);
    blk.b00 = kron(blk.b00, pg);
    blk.b01 = kron(blk.b01, pg);
    blk.b11 = kron(blk.b11, pg);
    blk.with_jpm = true;
}

// Evolve the three blocks under branch Hamiltonians (hq acting from the
// left on row branch q). Returns per-block trajectories; zero blocks are
// skipped and their trajectory left empty.
struct BlockRun {
    Trajectory t00, t01, t11;
    double w0 = 0.0, w1 = 0.0;
    bool ran00 = false, ran01 = false, ran11 = false;
};

BlockRun evolve_blocks(Blocks& blk, const Operator& h0, const Operator& h1,
                       const DissipatorSet& diss, double duration, const IntegratorConfig& cfg) {
    BlockRun run;
    const auto channels = detail::channel_matrices(diss);
    const HilbertLayout lay = blk.layout();
    run.w0 = blk.b00.trace().real();
    run.w1 = blk.b11.trace().real();
    const double scale = std::max(detail::generator_scale(h0.mat, diss),
                                  detail::generator_scale(h1.mat, diss));
    if (run.w0 > 1e-14) {
        const auto gen = detail::lindblad_generator(h0.mat, h0.mat, channels);
        auto res = detail::evolve_generator_batch(gen, lay, {Matrix(blk.b00 / run.w0)}, {true},
                                                  duration, cfg, scale);
        run.t00 = std::move(res.front());
        blk.b00 = run.w0 * run.t00.final_block;
        run.ran00 = true;
    }
    if (run.w1 > 1e-14) {
        const auto gen = detail::lindblad_generator(h1.mat, h1.mat, channels);
        auto res = detail::evolve_generator_batch(gen, lay, {Matrix(blk.b11 / run.w1)}, {true},
                                                  duration, cfg, scale);
        run.t11 = std::move(res.front());
        blk.b11 = run.w1 * run.t11.final_block;
        run.ran11 = true;
    }
    if (blk.has01 && blk.b01.cwiseAbs().maxCoeff() > 1e-300) {
        const auto gen = detail::lindblad_generator(h0.mat, h1.mat, channels);
        auto res = detail::evolve_generator_batch(gen, lay, {blk.b01}, {false}, duration, cfg,
                                                  scale);
        run.t01 = std::move(res.front());
        blk.b01 = run.t01.final_block;
        run.ran01 = true;
    } else {
        blk.b01 = Matrix::Zero(blk.block_dim(), blk.block_dim());
        blk.has01 = false;
    }
    return run;
}

// Assemble a full cavity (x) qubit (x) JPM density matrix from measured blocks.
Matrix full_from_blocks(const Blocks& blk) {
    const int nf = blk.n_fock;
    const int nj = blk.with_jpm ? 3 : 1;
    const int dim = nf * 2 * nj;
    Matrix rho = Matrix::Zero(dim, dim);
    auto idx = [&](int n, int q, int j) { return (n * 2 + q) * nj + j; };
    auto bidx = [&](int n, int j) { return n * nj + j; };
    for (int n = 0; n < nf; ++n)
        for (int j = 0; j < nj; ++j)
            for (int m = 0; m < nf; ++m)
                for (int l = 0; l < nj; ++l) {
                    rho(idx(n, 0, j), idx(m, 0, l)) = blk.b00(bidx(n, j), bidx(m, l));
                    rho(idx(n, 1, j), idx(m, 1, l)) = blk.b11(bidx(n, j), bidx(m, l));
                    rho(idx(n, 0, j), idx(m, 1, l)) = blk.b01(bidx(n, j), bidx(m, l));
                    rho(idx(n, 1, j), idx(m, 0, l)) = std::conj(blk.b01(bidx(m, l), bidx(n, j)));
                }
    return rho;
}

// JPM-sector-restricted cavity (x) qubit matrix from measured blocks:
// sector {2} for clicked, {0, 1} for not clicked.
Matrix sector_cavity_qubit(const Blocks& blk, bool clicked) {
    const int nf = blk.n_fock;
    const int nj = 3;
    Matrix out = Matrix::Zero(2 * nf, 2 * nf);
    auto add = [&](const Matrix& b, int q, int q2) {
        for (int n = 0; n < nf; ++n)
            for (int m = 0; m < nf; ++m) {
                Complex acc(0.0, 0.0);
                if (clicked)
                    acc = b(n * nj + 2, m * nj + 2);
                else
                    acc = b(n * nj + 0, m * nj + 0) + b(n * nj + 1, m * nj + 1);
                out(2 * n + q, 2 * m + q2) += acc;
            }
    };
    add(blk.b00, 0, 0);
    add(blk.b11, 1, 1);
    add(blk.b01, 0, 1);
    Matrix b10 = blk.b01.adjoint();
    add(b10, 1, 0);
    return out;
}

Eigen::Matrix2cd qubit_from_cavity_qubit(const Matrix& rho, int nf) {
    Eigen::Matrix2cd rq = Eigen::Matrix2cd::Zero();
    for (int q = 0; q < 2; ++q)
        for (int q2 = 0; q2 < 2; ++q2)
            for (int n = 0; n < nf; ++n) rq(q, q2) += rho(2 * n + q, 2 * n + q2);
    return rq;
}

RunRecord measure_dispersive(const QuantumState& cq, const SystemParams& p, double t_m,
                             const IntegratorConfig& cfg) {
    Blocks blk = blocks_from_state(cq);
    attach_jpm_ground(blk);
    const HilbertLayout lay = blk.layout();
    const Operator h0 = measurement_stage_hamiltonian(p, 0, lay);
    const Operator h1 = measurement_stage_hamiltonian(p, 1, lay);
    const DissipatorSet diss = build_dissipators(p, lay, Stage::Measure);
    BlockRun run = evolve_blocks(blk, h0, h1, diss, t_m, cfg);

    RunRecord rec;
    rec.mode = CouplingModel::Dispersive;

    const Trajectory& tref = run.ran00 ? run.t00 : run.t11;
    rec.times = tref.times;
    const size_t npts = rec.times.size();
    rec.cavity_occupation.assign(npts, 0.0);
    rec.jpm_measured.assign(npts, 0.0);
    rec.qubit_sz.assign(npts, 0.0);
    rec.qubit_states.assign(npts, Eigen::Matrix2cd::Zero());
    for (size_t i = 0; i < npts; ++i) {
        double occ = 0.0, meas = 0.0, sz = 0.0;
        Eigen::Matrix2cd rq = Eigen::Matrix2cd::Zero();
        if (run.ran00) {
            occ += run.w0 * run.t00.cavity_occupation[i];
            meas += run.w0 * run.t00.jpm_measured[i];
            sz += run.w0 * run.t00.trace_real[i];
            rq(0, 0) = run.w0 * run.t00.trace_value[i];
        }
        if (run.ran11) {
            occ += run.w1 * run.t11.cavity_occupation[i];
            meas += run.w1 * run.t11.jpm_measured[i];
            sz -= run.w1 * run.t11.trace_real[i];
            rq(1, 1) = run.w1 * run.t11.trace_value[i];
        }
        if (run.ran01) {
            rq(0, 1) = run.t01.trace_value[i];
            rq(1, 0) = std::conj(rq(0, 1));
        }
        rec.cavity_occupation[i] = occ;
        rec.jpm_measured[i] = meas;
        rec.qubit_sz[i] = sz;
        rec.qubit_states[i] = rq;
    }
    rec.click_probability = rec.jpm_measured.empty() ? 0.0 : rec.jpm_measured.back();

    const int nf = blk.n_fock;
    Matrix clicked = sector_cavity_qubit(blk, true);
    Matrix not_clicked = sector_cavity_qubit(blk, false);
    const double pc = clicked.trace().real();
    const double pnc = not_clicked.trace().real();
    rec.click_probability = pc;
    const HilbertLayout cq_lay = HilbertLayout::cavity_qubit(nf);
    if (pc > 1e-14) {
        rec.qubit_given_click = qubit_from_cavity_qubit(clicked, nf) / pc;
        rec.state_given_click = QuantumState::density(cq_lay, Matrix(clicked / pc));
    }
    if (pnc > 1e-14) {
        rec.qubit_given_no_click = qubit_from_cavity_qubit(not_clicked, nf) / pnc;
        rec.state_given_no_click = QuantumState::density(cq_lay, Matrix(not_clicked / pnc));
    }
    rec.qubit_unconditional =
        pc * rec.qubit_given_click + pnc * rec.qubit_given_no_click;
    rec.final_state = QuantumState::density(HilbertLayout::full(nf), full_from_blocks(blk));
    return rec;
}

RunRecord measure_jc(const QuantumState& cq, const SystemParams& p, double t_m,
                     const IntegratorConfig& cfg) {
    const int nf = cq.layout().n_fock();
    const HilbertLayout full = HilbertLayout::full(nf);
    Matrix rho0 = kron(cq.density_matrix(), jpm_project(0));
    const Operator h = jc_measurement_stage_hamiltonian(p, full);
    const DissipatorSet diss = build_dissipators(p, full, Stage::Measure);
    Trajectory traj = evolve_lindblad(QuantumState::density(full, std::move(rho0)),
                                      HamiltonianSource(h), diss, t_m, cfg);

    RunRecord rec;
    rec.mode = CouplingModel::JaynesCummings;
    rec.times = traj.times;
    rec.cavity_occupation = traj.cavity_occupation;
    rec.jpm_measured = traj.jpm_measured;
    rec.qubit_sz = traj.qubit_sz;
    rec.qubit_states = traj.qubit_states;
    for (size_t i = 0; i < rec.times.size(); ++i)
        unwind_qubit_matrix(rec.qubit_states[i], jc_frame_phase(p, rec.times[i]));
    rec.click_probability = rec.jpm_measured.empty() ? 0.0 : rec.jpm_measured.back();

    const double theta = jc_frame_phase(p, t_m);
    Matrix rho = apply_qubit_phases(traj.state().density_matrix(), full, 0.0, theta);
    rec.final_state = QuantumState::density(full, rho);

    // Conditional sectors over the JPM level.
    const HilbertLayout cq_lay = HilbertLayout::cavity_qubit(nf);
    Matrix clicked = Matrix::Zero(2 * nf, 2 * nf);
    Matrix not_clicked = Matrix::Zero(2 * nf, 2 * nf);
    for (int n = 0; n < nf; ++n)
        for (int q = 0; q < 2; ++q)
            for (int m = 0; m < nf; ++m)
                for (int q2 = 0; q2 < 2; ++q2) {
                    clicked(2 * n + q, 2 * m + q2) = rho((n * 2 + q) * 3 + 2, (m * 2 + q2) * 3 + 2);
                    Complex acc(0.0, 0.0);
                    for (int j = 0; j < 2; ++j)
                        acc += rho((n * 2 + q) * 3 + j, (m * 2 + q2) * 3 + j);
                    not_clicked(2 * n + q, 2 * m + q2) = acc;
                }
    const double pc = clicked.trace().real();
    const double pnc = not_clicked.trace().real();
    rec.click_probability = pc;
    if (pc > 1e-14) {
        rec.qubit_given_click = qubit_from_cavity_qubit(clicked, nf) / pc;
        rec.state_given_click = QuantumState::density(cq_lay, Matrix(clicked / pc));
    }
    if (pnc > 1e-14) {
        rec.qubit_given_no_click = qubit_from_cavity_qubit(not_clicked, nf) / pnc;
        rec.state_given_no_click = QuantumState::density(cq_lay, Matrix(not_clicked / pnc));
    }
    rec.qubit_unconditional = pc * rec.qubit_given_click + pnc * rec.qubit_given_no_click;
    return rec;
}

QuantumState jc_drive_output(const SystemParams& p, Complex a, Complex b,
                             const IntegratorConfig& cfg) {
    const int nf = drive_fock_dim(p, p.drive_amp, p.t_drive);
    const HilbertLayout lay = HilbertLayout::cavity_qubit(nf);
    Vector vac = Vector::Zero(nf);
    vac(0) = 1.0;
    Vector q(2);
    q << a, b;
    const QuantumState start = product_state(lay, vac, q);
    const Operator h = jc_drive_stage_hamiltonian(p, p.drive_amp, lay);
    Trajectory traj = evolve_schrodinger(start, HamiltonianSource(h), p.t_drive, cfg);
    const double phi0 = branch0_drive_phase(p.drive_amp, p.chi_q(), p.t_drive);
    Vector psi = apply_qubit_phases(traj.state().ket(), lay, -phi0, jc_frame_phase(p, p.t_drive));
    return QuantumState::pure(lay, std::move(psi));
}

QuantumState jc_drive_output_density(const SystemParams& p, const Eigen::Matrix2cd& qubit,
                                     const IntegratorConfig& cfg) {
    const int nf = drive_fock_dim(p, p.drive_amp, p.t_drive);
    const HilbertLayout lay = HilbertLayout::cavity_qubit(nf);
    Matrix vac = Matrix::Zero(nf, nf);
    vac(0, 0) = 1.0;
    Matrix rho = kron(vac, Matrix(qubit));
    const Operator h = jc_drive_stage_hamiltonian(p, p.drive_amp, lay);
    Trajectory traj = evolve_lindblad(QuantumState::density(lay, std::move(rho)),
                                      HamiltonianSource(h), {}, p.t_drive, cfg);
    const double phi0 = branch0_drive_phase(p.drive_amp, p.chi_q(), p.t_drive);
    Matrix out = apply_qubit_phases(traj.state().density_matrix(), lay, -phi0,
                                    jc_frame_phase(p, p.t_drive));
    return QuantumState::density(lay, std::move(out));
}

} // namespace

DriveStageResult run_drive_stage(const SystemParams& p, Complex a, Complex b, CouplingModel mode,
                                 const IntegratorConfig& cfg) {
    if (std::abs(std::norm(a) + std::norm(b) - 1.0) > 1e-10)
        throw NumericalError("run_drive_stage: qubit amplitudes not normalized");

    BranchDrive bd = drive_branches(p, p.drive_amp, p.t_drive, cfg);

    DriveStageResult out{QuantumState::pure(HilbertLayout::cavity_only(1), Vector::Ones(1)),
                         bd.alpha0,
                         bd.alpha1,
                         bd.fid0,
                         bd.fid1,
                         bd.times,
                         bd.occ0,
                         bd.occ1,
                         bd.amp0,
                         bd.amp1,
                         a,
                         b,
                         mode};

    if (mode == CouplingModel::Dispersive) {
        if (bd.fid0 < 1.0 - 1e-6 || bd.fid1 < 1.0 - 1e-6)
            throw TruncationError("run_drive_stage: branch pointer fidelity below 1 - 1e-6");
        const HilbertLayout lay = HilbertLayout::cavity_qubit(bd.n_fock);
        Vector psi = Vector::Zero(lay.dim());
        for (int n = 0; n < bd.n_fock; ++n) {
            psi(2 * n + 0) = a * bd.ket0(n);
            psi(2 * n + 1) = b * bd.ket1(n);
        }
        out.state = QuantumState::pure(lay, std::move(psi));
        return out;
    }

    // Jaynes-Cummings: the exchange coupling entangles the branches; the
    // branch diagnostics come from the basis preparations.
    const QuantumState jc_state = jc_drive_output(p, a, b, cfg);
    out.state = jc_state;
    const int nf = jc_state.layout().n_fock();
    const Vector& psi = jc_state.ket();
    Vector v0(nf), v1(nf);
    for (int n = 0; n < nf; ++n) {
        v0(n) = psi(2 * n + 0);
        v1(n) = psi(2 * n + 1);
    }
    const double w0 = v0.squaredNorm(), w1 = v1.squaredNorm();
    auto branch_report = [&](Vector v, double w, Complex target, double& fid, Complex& alpha) {
        if (w < 1e-14) {
            fid = 0.0;
            alpha = 0.0;
            return;
        }
        v /= std::sqrt(w);
        Complex amp(0.0, 0.0);
        for (int n = 0; n + 1 < nf; ++n) amp += std::conj(v(n)) * std::sqrt(double(n + 1)) * v(n + 1);
        alpha = amp;
        const Vector tgt = coherent_state(target, nf).ket();
        fid = std::norm(tgt.dot(v));
    };
    const StageDetunings det = stage_detunings(p);
    const Complex a0_frame = std::exp(-kI * det.cavity_branch0 * p.t_drive) * bd.alpha0;
    branch_report(v0, w0, a0_frame, out.branch_fidelity0, out.alpha0);
    branch_report(v1, w1, bd.alpha1, out.branch_fidelity1, out.alpha1);
    return out;
}

RunRecord run_measurement_stage(const QuantumState& cavity_qubit, const SystemParams& p,
                                double t_m, CouplingModel mode, const IntegratorConfig& cfg) {
    if (!cavity_qubit.layout().has_qubit() || cavity_qubit.layout().has_jpm())
        throw DimensionMismatch("run_measurement_stage: cavity (x) qubit input expected");
    if (mode == CouplingModel::Dispersive) return measure_dispersive(cavity_qubit, p, t_m, cfg);
    return measure_jc(cavity_qubit, p, t_m, cfg);
}

RunRecord run_reset_stage(const RunRecord& measured, const SystemParams& p) {
    if (!measured.final_state)
        throw NumericalError("run_reset_stage: measurement output required");
    RunRecord rec = measured;
    const QuantumState& full = *measured.final_state;
    const int nf = full.layout().n_fock();
    const HilbertLayout cq = HilbertLayout::cavity_qubit(nf);
    Matrix rho_cq = trace_out(full.density_matrix(), full.layout(), Subsystem::Jpm);

    // alpha_M from the qubit-|1> branch mean photon number.
    double w1 = 0.0, n1 = 0.0;
    for (int n = 0; n < nf; ++n) {
        const double pop = rho_cq(2 * n + 1, 2 * n + 1).real();
        w1 += pop;
        n1 += n * pop;
    }
    const double alpham_sq = w1 > 1e-14 ? n1 / w1 : 0.0;
    rec.alpham_sq = alpham_sq;
    rec.reset_amp = p.t_drive > 0.0 ? 2.0 * std::sqrt(alpham_sq) / p.t_drive : 0.0;
    // beta = -alpha_M with alpha_M along the bright pointer direction.
    Complex dir(0.0, -1.0);
    if (std::abs(rec.alpha1) > 1e-14) dir = rec.alpha1 / std::abs(rec.alpha1);
    const Complex beta = -dir * std::sqrt(alpham_sq);
    rec.reset_displacement = beta;

    const Matrix d1 = displacement(beta, nf).mat;
    const Matrix id = Matrix::Identity(nf, nf);
    // U_r = I (x) |0><0| + D(beta) (x) |1><1| in the (cavity x qubit) order
    Matrix ur = Matrix::Zero(2 * nf, 2 * nf);
    for (int n = 0; n < nf; ++n)
        for (int m = 0; m < nf; ++m) {
            ur(2 * n + 0, 2 * m + 0) = id(n, m);
            ur(2 * n + 1, 2 * m + 1) = d1(n, m);
        }
    auto apply_reset = [&](const Matrix& rho) { return Matrix(ur * rho * ur.adjoint()); };

    Matrix after = apply_reset(rho_cq);
    double w0r = 0.0, occ0 = 0.0, vac0 = 0.0;
    double w1r = 0.0, occ1 = 0.0, vac1 = 0.0;
    for (int n = 0; n < nf; ++n) {
        const double p0 = after(2 * n + 0, 2 * n + 0).real();
        const double p1 = after(2 * n + 1, 2 * n + 1).real();
        w0r += p0;
        w1r += p1;
        occ0 += n * p0;
        occ1 += n * p1;
        if (n == 0) {
            vac0 = p0;
            vac1 = p1;
        }
    }
    rec.residual_occupation0 = w0r > 1e-14 ? occ0 / w0r : 0.0;
    rec.residual_occupation1 = w1r > 1e-14 ? occ1 / w1r : 0.0;
    rec.vacuum_infidelity0 = w0r > 1e-14 ? 1.0 - vac0 / w0r : 0.0;
    rec.vacuum_infidelity1 = w1r > 1e-14 ? 1.0 - vac1 / w1r : 0.0;
    rec.post_reset_state = QuantumState::density(cq, 0.5 * (after + Matrix(after.adjoint())));

    if (rec.state_given_click) {
        Matrix m = apply_reset(rec.state_given_click->density_matrix());
        rec.state_given_click = QuantumState::density(cq, 0.5 * (m + Matrix(m.adjoint())));
        rec.qubit_given_click = qubit_from_cavity_qubit(rec.state_given_click->rho(), nf);
    }
    if (rec.state_given_no_click) {
        Matrix m = apply_reset(rec.state_given_no_click->density_matrix());
        rec.state_given_no_click = QuantumState::density(cq, 0.5 * (m + Matrix(m.adjoint())));
        rec.qubit_given_no_click = qubit_from_cavity_qubit(rec.state_given_no_click->rho(), nf);
    }
    return rec;
}

RunRecord run_full_protocol(const SystemParams& p, Complex a, Complex b, CouplingModel mode,
                            const IntegratorConfig& cfg) {
    DriveStageResult drv = run_drive_stage(p, a, b, mode, cfg);
    RunRecord rec = run_measurement_stage(drv.state, p, p.t_measure, mode, cfg);
    rec.alpha0 = drv.alpha0;
    rec.alpha1 = drv.alpha1;
    rec.drive = drv;
    return run_reset_stage(rec, p);
}

RunRecord run_full_protocol_density(const SystemParams& p, const Eigen::Matrix2cd& qubit,
                                    CouplingModel mode, const IntegratorConfig& cfg) {
    if (mode == CouplingModel::Dispersive) {
        BranchDrive bd = drive_branches(p, p.drive_amp, p.t_drive, cfg);
        Blocks blk = blocks_from_branches(qubit, bd.ket0, bd.ket1);
        const HilbertLayout cq = HilbertLayout::cavity_qubit(bd.n_fock);
        Matrix rho = Matrix::Zero(2 * bd.n_fock, 2 * bd.n_fock);
        for (int n = 0; n < bd.n_fock; ++n)
            for (int m = 0; m < bd.n_fock; ++m) {
                rho(2 * n + 0, 2 * m + 0) = blk.b00(n, m);
                rho(2 * n + 0, 2 * m + 1) = blk.b01(n, m);
                rho(2 * n + 1, 2 * m + 0) = std::conj(blk.b01(m, n));
                rho(2 * n + 1, 2 * m + 1) = blk.b11(n, m);
            }
        RunRecord rec = run_measurement_stage(
            QuantumState::density(cq, 0.5 * (rho + Matrix(rho.adjoint()))), p, p.t_measure,
            CouplingModel::Dispersive, cfg);
        rec.alpha0 = bd.alpha0;
        rec.alpha1 = bd.alpha1;
        return run_reset_stage(rec, p);
    }
    const QuantumState driveout = jc_drive_output_density(p, qubit, cfg);
    RunRecord rec = run_measurement_stage(driveout, p, p.t_measure, mode, cfg);
    rec.alpha0 = pointer_alpha0(p, p.drive_amp, p.t_drive);
    rec.alpha1 = pointer_alpha1(p.drive_amp, p.t_drive);
    return run_reset_stage(rec, p);
}

RunRecord run_protocol_from_state(const SystemParams& p, const QuantumState& cavity_qubit,
                                  CouplingModel mode, const IntegratorConfig& cfg) {
    const int nf = cavity_qubit.layout().n_fock();
    const double phi0 = branch0_drive_phase(p.drive_amp, p.chi_q(), p.t_drive);
    QuantumState driven = cavity_qubit; // placeholder, replaced below
    if (mode == CouplingModel::Dispersive) {
        Blocks blk = blocks_from_state(cavity_qubit);
        const HilbertLayout lay = blk.layout();
        const Operator h0 = drive_stage_hamiltonian(p, 0, p.drive_amp, lay);
        const Operator h1 = drive_stage_hamiltonian(p, 1, p.drive_amp, lay);
        evolve_blocks(blk, h0, h1, {}, p.t_drive, cfg);
        blk.b01 *= std::exp(kI * (-phi0));
        Matrix rho = Matrix::Zero(2 * nf, 2 * nf);
        for (int n = 0; n < nf; ++n)
            for (int m = 0; m < nf; ++m) {
                rho(2 * n + 0, 2 * m + 0) = blk.b00(n, m);
                rho(2 * n + 0, 2 * m + 1) = blk.b01(n, m);
                rho(2 * n + 1, 2 * m + 0) = std::conj(blk.b01(m, n));
                rho(2 * n + 1, 2 * m + 1) = blk.b11(n, m);
            }
        driven = QuantumState::density(HilbertLayout::cavity_qubit(nf),
                                       0.5 * (rho + Matrix(rho.adjoint())));
    } else {
        const Operator h = jc_drive_stage_hamiltonian(p, p.drive_amp, cavity_qubit.layout());
        Trajectory traj = evolve_lindblad(cavity_qubit.to_density(), HamiltonianSource(h), {},
                                          p.t_drive, cfg);
        Matrix out = apply_qubit_phases(traj.state().density_matrix(), cavity_qubit.layout(),
                                        -phi0, jc_frame_phase(p, p.t_drive));
        driven = QuantumState::density(cavity_qubit.layout(), std::move(out));
    }
    RunRecord rec = run_measurement_stage(driven, p, p.t_measure, mode, cfg);
    rec.alpha0 = pointer_alpha0(p, p.drive_amp, p.t_drive);
    rec.alpha1 = pointer_alpha1(p.drive_amp, p.t_drive);
    return run_reset_stage(rec, p);
}

JointStats run_repeated_protocol(const SystemParams& p, Complex a, Complex b, CouplingModel mode,
                                 bool reset_between, const IntegratorConfig& cfg) {
    JointStats js{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    RunRecord r1;
    if (reset_between) {
        r1 = run_full_protocol(p, a, b, mode, cfg);
    } else {
        DriveStageResult drv = run_drive_stage(p, a, b, mode, cfg);
        r1 = run_measurement_stage(drv.state, p, p.t_measure, mode, cfg);
        r1.alpha0 = drv.alpha0;
        r1.alpha1 = drv.alpha1;
    }
    const double p1 = r1.click_probability;
    const double p0 = 1.0 - p1;
    js.p0 = p0;
    js.p1 = p1;

    auto second_click_prob = [&](bool first_clicked) -> double {
        const auto& cond = first_clicked ? r1.state_given_click : r1.state_given_no_click;
        if (!cond) return 0.0;
        if (reset_between) {
            // Reset returns the cavity to near-vacuum; the second run
            // consumes the conditional qubit state with a fresh cavity.
            Eigen::Matrix2cd rq = first_clicked ? r1.qubit_given_click : r1.qubit_given_no_click;
            rq = 0.5 * (rq + Eigen::Matrix2cd(rq.adjoint()));
            RunRecord r2 = run_full_protocol_density(p, rq, mode, cfg);
            return r2.click_probability;
        }
        RunRecord r2 = run_protocol_from_state(p, *cond, mode, cfg);
        return r2.click_probability;
    };

    if (p1 > 1e-14) {
        const double c2 = second_click_prob(true);
        js.p11 = p1 * c2;
        js.p01 = p1 * (1.0 - c2);
    }
    if (p0 > 1e-14) {
        const double c2 = second_click_prob(false);
        js.p10 = p0 * c2;
        js.p00 = p0 * (1.0 - c2);
    }
    return js;
}

Trajectory detection_probability_trace(const SystemParams& p, double alpha_sq, double t_m,
                                       const IntegratorConfig& cfg) {
    if (alpha_sq < 0.0) throw NumericalError("detection_probability_trace: negative occupation");
    const int nf = required_fock_dim(std::sqrt(alpha_sq));
    const HilbertLayout lay = HilbertLayout::cavity_jpm(nf);
    const Complex alpha = Complex(0.0, -1.0) * std::sqrt(alpha_sq);
    const Vector cav = coherent_state(alpha, nf).ket();
    Vector ground = Vector::Zero(3);
    ground(0) = 1.0;
    const QuantumState start = product_state(lay, cav, std::nullopt, ground);
    const Operator h = measurement_stage_hamiltonian(p, 1, lay);
    const DissipatorSet diss = build_dissipators(p, lay, Stage::Measure);
    return evolve_lindblad(start, HamiltonianSource(h), diss, t_m, cfg);
}

TomographySeries run_channel_tomography(const SystemParams& p, CouplingModel mode, double t_m,
                                        const IntegratorConfig& cfg) {
    TomographySeries series;
    if (mode == CouplingModel::Dispersive) {
        // sigma_z-conserving dynamics: the channel is fully described by
        // the evolution of the three qubit blocks; the physical-state
        // outputs follow by linearity.
        BranchDrive bd = drive_branches(p, p.drive_amp, p.t_drive, cfg);
        Eigen::Matrix2cd plus;
        plus << 0.5, 0.5, 0.5, 0.5;
        Blocks blk = blocks_from_branches(plus, bd.ket0, bd.ket1);
        blk.b00 *= 2.0; // unit-trace diagonal blocks, unit coherence block
        blk.b01 *= 2.0;
        blk.b11 *= 2.0;
        attach_jpm_ground(blk);
        const HilbertLayout lay = blk.layout();
        const Operator h0 = measurement_stage_hamiltonian(p, 0, lay);
        const Operator h1 = measurement_stage_hamiltonian(p, 1, lay);
        const DissipatorSet diss = build_dissipators(p, lay, Stage::Measure);
        BlockRun run = evolve_blocks(blk, h0, h1, diss, t_m, cfg);
        series.times = run.t00.times;
        for (size_t i = 0; i < series.times.size(); ++i) {
            const Complex t00 = run.t00.trace_value[i];
            const Complex t11 = run.t11.trace_value[i];
            const Complex t01 = run.ran01 ? run.t01.trace_value[i] : Complex(0.0, 0.0);
            TomographyOutputs out;
            out.out0 << t00, 0.0, 0.0, 0.0;
            out.out1 << 0.0, 0.0, 0.0, t11;
            out.out_plus << 0.5 * t00, 0.5 * t01, 0.5 * std::conj(t01), 0.5 * t11;
            out.out_plus_i << 0.5 * t00, Complex(0.0, -0.5) * t01,
                Complex(0.0, 0.5) * std::conj(t01), 0.5 * t11;
            series.outputs.push_back(out);
        }
        return series;
    }

    // Jaynes-Cummings: evolve the four probe states through the drive and
    // batch the four measurement-stage integrations through one generator.
    const double isq = 1.0 / std::sqrt(2.0);
    const QuantumState d0 = jc_drive_output(p, 1.0, 0.0, cfg);
    const QuantumState d1 = jc_drive_output(p, 0.0, 1.0, cfg);
    const QuantumState dp = jc_drive_output(p, isq, isq, cfg);
    const QuantumState dpi = jc_drive_output(p, isq, Complex(0.0, isq), cfg);
    const int nf = d0.layout().n_fock();
    const HilbertLayout full = HilbertLayout::full(nf);
    const Matrix pg = jpm_project(0);
    std::vector<Matrix> initial = {kron(d0.density_matrix(), pg), kron(d1.density_matrix(), pg),
                                   kron(dp.density_matrix(), pg), kron(dpi.density_matrix(), pg)};
    const Operator h = jc_measurement_stage_hamiltonian(p, full);
    const DissipatorSet diss = build_dissipators(p, full, Stage::Measure);
    const double scale = detail::generator_scale(h.mat, diss);
    const auto gen = detail::lindblad_generator(h.mat, h.mat, detail::channel_matrices(diss));
    auto trajs = detail::evolve_generator_batch(gen, full, initial, {true, true, true, true}, t_m,
                                                cfg, scale);
    series.times = trajs[0].times;
    for (size_t i = 0; i < series.times.size(); ++i) {
        const double theta = jc_frame_phase(p, series.times[i]);
        TomographyOutputs out;
        out.out0 = trajs[0].qubit_states[i];
        out.out1 = trajs[1].qubit_states[i];
        out.out_plus = trajs[2].qubit_states[i];
        out.out_plus_i = trajs[3].qubit_states[i];
        unwind_qubit_matrix(out.out0, theta);
        unwind_qubit_matrix(out.out1, theta);
        unwind_qubit_matrix(out.out_plus, theta);
        unwind_qubit_matrix(out.out_plus_i, theta);
        series.outputs.push_back(out);
    }
    return series;
}

} // namespace jpm
