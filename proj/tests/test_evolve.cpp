#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jpm/evolve.hpp"
#include "jpm/protocol.hpp"

using namespace jpm;

namespace {

// Two-level system on the qubit factor of a 1-Fock layout.
struct Tls {
    HilbertLayout lay{1, true, false};
    Operator hamiltonian(double splitting) const {
        Matrix h = Matrix::Zero(2, 2);
        h(0, 0) = 0.5 * splitting;
        h(1, 1) = -0.5 * splitting;
        return Operator{lay, h};
    }
    Dissipator decay(double gamma) const {
        Matrix sm = Matrix::Zero(2, 2);
        sm(0, 1) = 1.0; // |0><1|
        return {Operator{lay, sm}, gamma};
    }
    QuantumState excited() const {
        Vector psi = Vector::Zero(2);
        psi(1) = 1.0;
        return QuantumState::pure(lay, psi);
    }
};

} // namespace

TEST_CASE("exponential decay of an excited two-level system") {
    Tls tls;
    const double gamma = 1e8;
    IntegratorConfig cfg;
    cfg.dt = 2e-10; // 0.02 / gamma
    Trajectory tr = evolve_lindblad(tls.excited(), HamiltonianSource(tls.hamiltonian(0.0)),
                                    {tls.decay(gamma)}, 3.0 / gamma, cfg);
    const double pop = 0.5 * (1.0 - tr.qubit_sz.back()); // excited population
    CHECK(pop == doctest::Approx(std::exp(-3.0)).epsilon(1e-6));
    CHECK(std::abs(tr.trace_real.back() - 1.0) < 1e-10);
}

TEST_CASE("vacuum Rabi oscillation: full excitation swap") {
    SystemParams p = SystemParams::defaults();
    p.gamma_j = p.gamma_d = p.gamma_r = 0.0;
    HilbertLayout lay = HilbertLayout::cavity_jpm(3);
    Operator h = measurement_stage_hamiltonian(p, 1, lay);
    // remove the residual equal detunings so the swap is exact
    Matrix clean = h.mat;
    const int i1g = lay.index(1, 0, 0);
    const int i0e = lay.index(0, 0, 1);
    clean(i1g, i1g) = clean(i0e, i0e) = 0.0;
    Vector fock1 = Vector::Zero(3);
    fock1(1) = 1.0;
    Vector ground = Vector::Zero(3);
    ground(0) = 1.0;
    QuantumState st = product_state(lay, fock1, std::nullopt, ground);
    IntegratorConfig cfg;
    cfg.dt = 3e-11;
    const double t_swap = kPi / (2.0 * p.g_j);
    Trajectory tr = evolve_lindblad(st, HamiltonianSource(Operator{lay, clean}), {}, t_swap, cfg);
    CHECK(tr.jpm_excited.back() > 1.0 - 1e-6);
    CHECK(tr.cavity_occupation.back() < 1e-6);
}

TEST_CASE("JPM branching ratio from the excited state") {
    SystemParams p = SystemParams::defaults();
    p.gamma_d = 0.0; // both tunnelling channels: bright and relaxation
    HilbertLayout lay(1, false, true);
    Vector cav = Vector::Ones(1);
    Vector excited = Vector::Zero(3);
    excited(1) = 1.0;
    QuantumState st = product_state(lay, cav, std::nullopt, excited);
    IntegratorConfig cfg;
    cfg.dt = 5e-11;
    Operator h{lay, Matrix::Zero(3, 3)};
    Trajectory tr = evolve_lindblad(st, HamiltonianSource(h),
                                    build_dissipators(p, lay, Stage::Measure), 5.0 / p.gamma_j,
                                    cfg);
    // P_m -> gamma_J / (gamma_J + gamma_R) = 1/2 for equal rates
    CHECK(tr.jpm_measured.back() == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("driven cavity, resonant branch: alpha(t) = -i a0 t / 2") {
    SystemParams p = SystemParams::defaults();
    const int nf = required_fock_dim(0.5 * p.drive_amp * p.t_drive);
    HilbertLayout lay = HilbertLayout::cavity_only(nf);
    Vector vac = Vector::Zero(nf);
    vac(0) = 1.0;
    IntegratorConfig cfg;
    cfg.dt = 1e-12;
    Trajectory tr =
        evolve_schrodinger(QuantumState::pure(lay, vac),
                           HamiltonianSource(drive_stage_hamiltonian(p, 1, p.drive_amp, lay)),
                           p.t_drive, cfg);
    for (size_t i = 1; i < tr.times.size(); ++i) {
        const Complex expected = pointer_alpha1(p.drive_amp, tr.times[i]);
        CHECK(std::abs(tr.cavity_amplitude[i] - expected) <= 1e-6 * std::abs(expected));
    }
    CHECK(std::abs(tr.trace_real.back() - 1.0) < 1e-10);
}

TEST_CASE("driven cavity, detuned branch: alpha(t) follows the closed form") {
    // alpha0(t) = -(a0 / 4 chi)(e^{i 2 chi t} - 1) in the branch-resonant
    // frame; the drive-frame amplitude carries the extra e^{-i delta t}.
    SystemParams p = SystemParams::defaults();
    const double delta = stage_detunings(p).cavity_branch0;
    const int nf = required_fock_dim(p.drive_amp / (2.0 * p.chi_q()));
    HilbertLayout lay = HilbertLayout::cavity_only(nf);
    Vector vac = Vector::Zero(nf);
    vac(0) = 1.0;
    IntegratorConfig cfg;
    cfg.dt = 1e-12;
    Trajectory tr =
        evolve_schrodinger(QuantumState::pure(lay, vac),
                           HamiltonianSource(drive_stage_hamiltonian(p, 0, p.drive_amp, lay)),
                           p.t_drive, cfg);
    double scale = 0.0;
    for (size_t i = 0; i < tr.times.size(); ++i)
        scale = std::max(scale, std::abs(pointer_alpha0(p, p.drive_amp, tr.times[i])));
    for (size_t i = 0; i < tr.times.size(); ++i) {
        const Complex expected = pointer_alpha0(p, p.drive_amp, tr.times[i]);
        const Complex measured =
            std::exp(Complex(0.0, delta * tr.times[i])) * tr.cavity_amplitude[i];
        CHECK(std::abs(measured - expected) <= 1e-6 * scale);
    }
    // the dark pointer returns to vacuum at t_d = pi / chi_Q
    CHECK(tr.cavity_occupation.back() < 1e-10);
}

TEST_CASE("zero drive leaves the rotating-frame state unchanged") {
    SystemParams p = SystemParams::defaults();
    HilbertLayout lay = HilbertLayout::cavity_only(12);
    QuantumState coh = coherent_state(1.0, 12);
    IntegratorConfig cfg;
    cfg.dt = 1e-12;
    Trajectory tr = evolve_schrodinger(
        coh, HamiltonianSource(drive_stage_hamiltonian(p, 1, 0.0, lay)), 20e-9, cfg);
    CHECK(std::norm(coh.ket().dot(tr.state().ket())) > 1.0 - 1e-10);
}

TEST_CASE("closed-system energy conservation") {
    SystemParams p = SystemParams::defaults();
    HilbertLayout lay = HilbertLayout::cavity_only(20);
    Operator h = drive_stage_hamiltonian(p, 0, p.drive_amp, lay);
    QuantumState coh = coherent_state(Complex(0.8, -0.4), 20);
    IntegratorConfig cfg;
    cfg.dt = 2e-12;
    Trajectory tr = evolve_schrodinger(coh, HamiltonianSource(h), 50e-9, cfg);
    const double e0 = coh.expectation(h.mat).real();
    const double e1 = tr.state().expectation(h.mat).real();
    CHECK(std::abs(e1 - e0) <= 1e-8 * std::abs(e0));
}

TEST_CASE("Schrodinger and Lindblad agree for closed evolution") {
    SystemParams p = SystemParams::defaults();
    HilbertLayout lay = HilbertLayout::cavity_only(16);
    Operator h = drive_stage_hamiltonian(p, 0, 0.5 * p.drive_amp, lay);
    Vector vac = Vector::Zero(16);
    vac(0) = 1.0;
    QuantumState st = QuantumState::pure(lay, vac);
    IntegratorConfig cfg;
    cfg.dt = 2e-12;
    Trajectory pure = evolve_schrodinger(st, HamiltonianSource(h), 30e-9, cfg);
    Trajectory open = evolve_lindblad(st, HamiltonianSource(h), {}, 30e-9, cfg);
    const double f = state_fidelity(pure.state(), open.state());
    CHECK(f > 1.0 - 1e-8);
}

TEST_CASE("linearity of the Lindblad propagator") {
    Tls tls;
    const double gamma = 5e7;
    IntegratorConfig cfg;
    cfg.dt = 2e-10;
    Matrix r1 = Matrix::Zero(2, 2);
    r1(1, 1) = 1.0;
    Matrix r2(2, 2);
    r2 << 0.7, 0.3, 0.3, 0.3;
    Matrix ravg = 0.5 * (r1 + r2);
    auto run = [&](const Matrix& rho) {
        return evolve_lindblad(QuantumState::density(tls.lay, rho),
                               HamiltonianSource(tls.hamiltonian(2e8)), {tls.decay(gamma)}, 40e-9,
                               cfg)
            .state()
            .density_matrix();
    };
    Matrix lhs = run(ravg);
    Matrix rhs = 0.5 * (run(r1) + run(r2));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("physicality probes hold along a dissipative trajectory") {
    SystemParams p = SystemParams::defaults();
    HilbertLayout lay = HilbertLayout::cavity_jpm(17);
    Vector g3 = Vector::Zero(3);
    g3(0) = 1.0;
    QuantumState st = product_state(lay, coherent_state(Complex(0.0, -1.0), 17).ket(),
                                    std::nullopt, g3);
    IntegratorConfig cfg;
    cfg.dt = 4e-12;
    Trajectory tr = evolve_lindblad(st, HamiltonianSource(measurement_stage_hamiltonian(p, 1, lay)),
                                    build_dissipators(p, lay, Stage::Measure), 30e-9, cfg);
    for (size_t i = 0; i < tr.times.size(); ++i) {
        CHECK(std::abs(tr.trace_real[i] - 1.0) < 1e-8);
        CHECK(tr.min_eigenvalue[i] > -1e-8);
        CHECK(tr.hermiticity_drift[i] < 1e-10);
    }
}

TEST_CASE("RK4 halving-step error ratio sits at fourth order") {
    // decaying coherence with a fast phase: exactly solvable
    Tls tls;
    const double delta = 6.3e9, gamma = 2e8, t_end = 10e-9;
    Matrix rho0(2, 2);
    rho0 << 0.5, 0.5, 0.5, 0.5;
    auto exact = [&](double t) {
        Matrix r(2, 2);
        r(1, 1) = 0.5 * std::exp(-gamma * t);
        r(0, 0) = 1.0 - r(1, 1).real();
        r(0, 1) = 0.5 * std::exp(Complex(-0.5 * gamma, delta) * t);
        r(1, 0) = std::conj(r(0, 1));
        return r;
    };
    auto err = [&](double dt) {
        IntegratorConfig cfg;
        cfg.dt = dt;
        Trajectory tr = evolve_lindblad(QuantumState::density(tls.lay, rho0),
                                        HamiltonianSource(tls.hamiltonian(delta)),
                                        {tls.decay(gamma)}, t_end, cfg);
        return (tr.state().density_matrix() - exact(t_end)).cwiseAbs().maxCoeff();
    };
    const double e1 = err(1e-12);
    const double e2 = err(0.5e-12);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("step-size bound is enforced at run start") {
    Tls tls;
    IntegratorConfig cfg;
    cfg.dt = 1e-9; // far beyond 0.02 / 6.3e9
    CHECK_THROWS_AS(evolve_lindblad(tls.excited(), HamiltonianSource(tls.hamiltonian(6.3e9)),
                                    {tls.decay(1e8)}, 1e-9, cfg),
                    StepSizeError);
}

TEST_CASE("truncation guard trips when the drive overfills the cavity") {
    SystemParams p = SystemParams::defaults();
    HilbertLayout lay = HilbertLayout::cavity_only(6);
    Vector vac = Vector::Zero(6);
    vac(0) = 1.0;
    IntegratorConfig cfg;
    cfg.dt = 1e-12;
    // resonant drive pushes |alpha|^2 ~ 10 into a 6-level cavity
    CHECK_THROWS_AS(
        evolve_schrodinger(QuantumState::pure(lay, vac),
                           HamiltonianSource(drive_stage_hamiltonian(p, 1, p.drive_amp, lay)),
                           p.t_drive, cfg),
        TruncationError);
}

TEST_CASE("time-dependent source matches the static fast path") {
    Tls tls;
    const double delta = 1e9, gamma = 1e8;
    Matrix h = tls.hamiltonian(delta).mat;
    IntegratorConfig cfg;
    cfg.dt = 1e-11;
    Matrix rho0(2, 2);
    rho0 << 0.5, 0.5, 0.5, 0.5;
    Trajectory fast = evolve_lindblad(QuantumState::density(tls.lay, rho0),
                                      HamiltonianSource(tls.hamiltonian(delta)),
                                      {tls.decay(gamma)}, 20e-9, cfg);
    HamiltonianSource slow(tls.lay, [h](double) { return h; });
    Trajectory ref = evolve_lindblad(QuantumState::density(tls.lay, rho0), slow,
                                     {tls.decay(gamma)}, 20e-9, cfg);
    CHECK((fast.state().density_matrix() - ref.state().density_matrix()).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("adaptive RK45 agrees with the fixed-step integrator") {
    Tls tls;
    const double delta = 5e8, gamma = 1e8;
    Matrix rho0(2, 2);
    rho0 << 0.8, 0.2, 0.2, 0.2;
    IntegratorConfig fixed;
    fixed.dt = 1e-12;
    IntegratorConfig adaptive;
    adaptive.method = IntegratorMethod::Rk45Adaptive;
    adaptive.dt = 2e-11;
    adaptive.rel_tol = 1e-10;
    adaptive.abs_tol = 1e-14;
    auto run = [&](const IntegratorConfig& c) {
        return evolve_lindblad(QuantumState::density(tls.lay, rho0),
                               HamiltonianSource(tls.hamiltonian(delta)), {tls.decay(gamma)},
                               25e-9, c)
            .state()
            .density_matrix();
    };
    CHECK((run(fixed) - run(adaptive)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pure input is promoted to a density matrix") {
    Tls tls;
    IntegratorConfig cfg;
    cfg.dt = 2e-10;
    Trajectory tr = evolve_lindblad(tls.excited(), HamiltonianSource(tls.hamiltonian(0.0)),
                                    {tls.decay(1e8)}, 1e-8, cfg);
    CHECK(!tr.state().is_pure());
}
