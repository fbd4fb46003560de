#include "jpm/evolve.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace jpm {
namespace detail {

namespace {

constexpr int kMaxBatch = 8;

// Internal signal for trace/positivity/Hermiticity violations; the public
// wrappers convert it into the halve-and-retry policy.
struct PhysicalityViolation {
    std::string what;
};

using Triplets = std::vector<Eigen::Triplet<Complex>>;

void add_kron(Triplets& out, const SparseGen& a, const SparseGen& b, Complex factor) {
    const int br = b.rows(), bc = b.cols();
    for (int i = 0; i < a.outerSize(); ++i)
        for (SparseGen::InnerIterator ia(a, i); ia; ++ia)
            for (int j = 0; j < b.outerSize(); ++j)
                for (SparseGen::InnerIterator ib(b, j); ib; ++ib)
                    out.emplace_back(ia.row() * br + ib.row(), ia.col() * bc + ib.col(),
                                     factor * ia.value() * ib.value());
}

SparseGen identity_sparse(int d) {
    SparseGen id(d, d);
    id.setIdentity();
    return id;
}

// y = S x for a row-major batch; one sparse traversal advances all columns.
void apply_generator(const SparseGen& s, const RowMat& x, RowMat& y) {
    const int rows = int(s.rows());
    const int k = int(x.cols());
    const Complex* vals = s.valuePtr();
    const int* cols = s.innerIndexPtr();
    const int* outer = s.outerIndexPtr();
    if (k == 1) {
        const Complex* xp = x.data();
        Complex* yp = y.data();
        for (int r = 0; r < rows; ++r) {
            Complex acc(0.0, 0.0);
            for (int p = outer[r]; p < outer[r + 1]; ++p) acc += vals[p] * xp[cols[p]];
            yp[r] = acc;
        }
        return;
    }
    Complex acc[kMaxBatch];
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < k; ++c) acc[c] = Complex(0.0, 0.0);
        for (int p = outer[r]; p < outer[r + 1]; ++p) {
            const Complex v = vals[p];
            const Complex* xr = x.data() + size_t(cols[p]) * k;
            for (int c = 0; c < k; ++c) acc[c] += v * xr[c];
        }
        Complex* yr = y.data() + size_t(r) * k;
        for (int c = 0; c < k; ++c) yr[c] = acc[c];
    }
}

// Layout-aware observable extraction from one vec'd column.
struct Extractor {
    HilbertLayout layout;
    int d, nc, nq, nj;

    explicit Extractor(const HilbertLayout& lay)
        : layout(lay), d(lay.dim()), nc(lay.n_fock()), nq(lay.has_qubit() ? 2 : 1),
          nj(lay.has_jpm() ? 3 : 1) {}

    Complex diag(const RowMat& x, int col, int idx) const {
        return x(size_t(idx) * d + idx, col);
    }

    Matrix column_as_matrix(const RowMat& x, int col) const {
        Matrix m(d, d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) m(i, j) = x(size_t(j) * d + i, col);
        return m;
    }

    void record(const RowMat& x, int col, bool physical, bool positivity, double t,
                Trajectory& out) const {
        out.times.push_back(t);
        Complex trace(0.0, 0.0);
        double occ = 0.0, sz = 0.0, top = 0.0;
        double jpm_pop[3] = {0.0, 0.0, 0.0};
        Complex amp(0.0, 0.0);
        for (int n = 0; n < nc; ++n)
            for (int q = 0; q < nq; ++q)
                for (int j = 0; j < nj; ++j) {
                    const int idx = (n * nq + q) * nj + j;
                    const Complex p = diag(x, col, idx);
                    trace += p;
                    occ += n * p.real();
                    if (layout.has_qubit()) sz += (q == 0 ? 1.0 : -1.0) * p.real();
                    if (layout.has_jpm()) jpm_pop[j] += p.real();
                    if (n == nc - 1) top += std::abs(p);
                    // <a> = sum sqrt(n+1) rho[(n+1, q, j), (n, q, j)]
                    if (n + 1 < nc) {
                        const int row = ((n + 1) * nq + q) * nj + j;
                        amp += std::sqrt(double(n + 1)) * x(size_t(idx) * d + row, col);
                    }
                }
        out.trace_real.push_back(trace.real());
        out.trace_value.push_back(trace);
        out.cavity_amplitude.push_back(amp);
        out.cavity_occupation.push_back(occ);
        out.top_fock_population.push_back(top);
        if (layout.has_qubit()) out.qubit_sz.push_back(sz);
        if (layout.has_jpm()) {
            out.jpm_ground.push_back(jpm_pop[0]);
            out.jpm_excited.push_back(jpm_pop[1]);
            out.jpm_measured.push_back(jpm_pop[2]);
        }
        if (layout.has_qubit()) {
            Eigen::Matrix2cd rq = Eigen::Matrix2cd::Zero();
            for (int q = 0; q < 2; ++q)
                for (int q2 = 0; q2 < 2; ++q2)
                    for (int n = 0; n < nc; ++n)
                        for (int j = 0; j < nj; ++j) {
                            const int r = (n * 2 + q) * nj + j;
                            const int c = (n * 2 + q2) * nj + j;
                            rq(q, q2) += x(size_t(c) * d + r, col);
                        }
            out.qubit_states.push_back(rq);
        }
        if (physical) {
            Matrix m = column_as_matrix(x, col);
            const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
            out.hermiticity_drift.push_back(herm);
            double min_eig = 0.0;
            if (positivity) {
                Matrix sym = 0.5 * (m + m.adjoint());
                Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
                min_eig = es.eigenvalues().minCoeff();
            }
            out.min_eigenvalue.push_back(min_eig);
        }
    }
};

void check_probes(const Trajectory& traj, bool physical, double top_fock_tol) {
    if (traj.top_fock_population.back() > top_fock_tol)
        throw TruncationError("evolve: top Fock level population " +
                              std::to_string(traj.top_fock_population.back()) +
                              " exceeds " + std::to_string(top_fock_tol));
    if (!physical) return;
    if (std::abs(traj.trace_real.back() - 1.0) > 1e-8)
        throw PhysicalityViolation{"trace deviation " +
                                   std::to_string(traj.trace_real.back() - 1.0)};
    if (traj.hermiticity_drift.back() > 1e-10)
        throw PhysicalityViolation{"Hermiticity drift " +
                                   std::to_string(traj.hermiticity_drift.back())};
    if (!traj.min_eigenvalue.empty() && traj.min_eigenvalue.back() < -1e-8)
        throw PhysicalityViolation{"negative eigenvalue " +
                                   std::to_string(traj.min_eigenvalue.back())};
}

void hermitize_column(RowMat& x, int col, int d) {
    for (int i = 0; i < d; ++i) {
        x(size_t(i) * d + i, col) = Complex(x(size_t(i) * d + i, col).real(), 0.0);
        for (int j = i + 1; j < d; ++j) {
            const size_t lo = size_t(j) * d + i; // (i, j) entry, column-major vec
            const size_t up = size_t(i) * d + j; // (j, i) entry
            const Complex avg = 0.5 * (x(lo, col) + std::conj(x(up, col)));
            x(lo, col) = avg;
            x(up, col) = std::conj(avg);
        }
    }
}

int auto_stride(const IntegratorConfig& cfg, double dt_eff) {
    if (cfg.record_stride > 0) return cfg.record_stride;
    return std::max(1, int(std::llround(0.5e-9 / dt_eff)));
}

// Dormand-Prince 5(4) tableau.
struct Dopri {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
};

} // namespace

SparseGen sparse_from_dense(const Matrix& m) {
    Triplets trips;
    for (int j = 0; j < m.cols(); ++j)
        for (int i = 0; i < m.rows(); ++i)
            if (m(i, j) != Complex(0.0, 0.0)) trips.emplace_back(i, j, m(i, j));
    SparseGen s(m.rows(), m.cols());
    s.setFromTriplets(trips.begin(), trips.end());
    s.makeCompressed();
    return s;
}

std::vector<std::pair<Matrix, double>> channel_matrices(const DissipatorSet& dissipators) {
    std::vector<std::pair<Matrix, double>> out;
    out.reserve(dissipators.size());
    for (const auto& dis : dissipators)
        if (dis.rate != 0.0) out.emplace_back(dis.jump.mat, dis.rate);
    return out;
}

SparseGen lindblad_generator(const Matrix& h_left, const Matrix& h_right,
                             const std::vector<std::pair<Matrix, double>>& channels) {
    const int d = int(h_left.rows());
    if (h_right.rows() != d || h_left.cols() != d || h_right.cols() != d)
        throw DimensionMismatch("lindblad_generator: Hamiltonian blocks disagree in dimension");
    const SparseGen id = identity_sparse(d);
    const Complex mi(0.0, -1.0);
    Triplets trips;
    add_kron(trips, id, sparse_from_dense(h_left), mi);
    add_kron(trips, sparse_from_dense(h_right.transpose()), id, -mi);
    for (const auto& [l, rate] : channels) {
        if (l.rows() != d) throw DimensionMismatch("lindblad_generator: jump operator dimension");
        const SparseGen ls = sparse_from_dense(l);
        const SparseGen lconj = sparse_from_dense(l.conjugate());
        const Matrix ldl = l.adjoint() * l;
        const SparseGen ldls = sparse_from_dense(ldl);
        const SparseGen ldlt = sparse_from_dense(ldl.transpose());
        add_kron(trips, lconj, ls, Complex(rate, 0.0));
        add_kron(trips, id, ldls, Complex(-0.5 * rate, 0.0));
        add_kron(trips, ldlt, id, Complex(-0.5 * rate, 0.0));
    }
    SparseGen s(size_t(d) * d, size_t(d) * d);
    s.setFromTriplets(trips.begin(), trips.end());
    s.makeCompressed();
    return s;
}

double generator_scale(const Matrix& h, const DissipatorSet& dissipators) {
    double scale = h.size() ? h.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& dis : dissipators) scale = std::max(scale, dis.rate);
    return scale;
}

namespace {

void enforce_step_bound(double dt, double scale) {
    if (scale <= 0.0) return;
    const double cap = 0.02 / scale;
    if (dt > cap * (1.0 + 1e-9))
        throw StepSizeError("integrator: dt = " + std::to_string(dt) +
                            " exceeds the stability bound 0.02/scale = " + std::to_string(cap));
}

std::vector<Trajectory> run_batch(const SparseGen& gen, const HilbertLayout& layout,
                                  const std::vector<Matrix>& initial,
                                  const std::vector<bool>& physical, double duration,
                                  const IntegratorConfig& cfg) {
    const int d = layout.dim();
    const int k = int(initial.size());
    if (k < 1 || k > kMaxBatch)
        throw DimensionMismatch("evolve_generator_batch: batch size must be in [1, 8]");
    if (int(physical.size()) != k)
        throw DimensionMismatch("evolve_generator_batch: physical flags mismatch batch");

    RowMat x(size_t(d) * d, k);
    for (int c = 0; c < k; ++c) {
        if (initial[c].rows() != d || initial[c].cols() != d)
            throw DimensionMismatch("evolve_generator_batch: initial block dimension");
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) x(size_t(j) * d + i, c) = initial[c](i, j);
    }

    const Extractor ex(layout);
    std::vector<Trajectory> out(k);

    auto record_all = [&](double t) {
        for (int c = 0; c < k; ++c) {
            ex.record(x, c, physical[c], cfg.check_positivity, t, out[c]);
            check_probes(out[c], physical[c], cfg.top_fock_tol);
        }
    };

    record_all(0.0);
    if (duration > 0.0) {
        if (cfg.method == IntegratorMethod::Rk4Fixed) {
            const long n_steps = std::max<long>(1, long(std::ceil(duration / cfg.dt - 1e-9)));
            const double dt = duration / double(n_steps);
            const int stride = auto_stride(cfg, dt);
            RowMat k1 = x, k2 = x, k3 = x, k4 = x, tmp = x;
            for (long step = 1; step <= n_steps; ++step) {
                apply_generator(gen, x, k1);
                tmp = x + (0.5 * dt) * k1;
                apply_generator(gen, tmp, k2);
                tmp = x + (0.5 * dt) * k2;
                apply_generator(gen, tmp, k3);
                tmp = x + dt * k3;
                apply_generator(gen, tmp, k4);
                x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                const bool last = step == n_steps;
                if (step % 100 == 0 && !last)
                    for (int c = 0; c < k; ++c)
                        if (physical[c]) hermitize_column(x, c, d);
                if (step % stride == 0 || last) record_all(double(step) * dt);
            }
        } else {
            // Dormand-Prince 5(4) with elementwise error control.
            double t = 0.0;
            double dt = cfg.dt;
            const double dt_max = cfg.dt;
            double next_record = 0.5e-9;
            if (cfg.record_stride > 0) next_record = cfg.record_stride * cfg.dt;
            const double record_interval = next_record;
            RowMat k1(x.rows(), k), k2(x.rows(), k), k3(x.rows(), k), k4(x.rows(), k),
                k5(x.rows(), k), k6(x.rows(), k), k7(x.rows(), k), tmp(x.rows(), k), err(x.rows(), k);
            apply_generator(gen, x, k1);
            long hermitize_counter = 0;
            while (t < duration * (1.0 - 1e-12)) {
                dt = std::min(dt, duration - t);
                tmp = x + dt * (Dopri::a21 * k1);
                apply_generator(gen, tmp, k2);
                tmp = x + dt * (Dopri::a31 * k1 + Dopri::a32 * k2);
                apply_generator(gen, tmp, k3);
                tmp = x + dt * (Dopri::a41 * k1 + Dopri::a42 * k2 + Dopri::a43 * k3);
                apply_generator(gen, tmp, k4);
                tmp = x + dt * (Dopri::a51 * k1 + Dopri::a52 * k2 + Dopri::a53 * k3 +
                                Dopri::a54 * k4);
                apply_generator(gen, tmp, k5);
                tmp = x + dt * (Dopri::a61 * k1 + Dopri::a62 * k2 + Dopri::a63 * k3 +
                                Dopri::a64 * k4 + Dopri::a65 * k5);
                apply_generator(gen, tmp, k6);
                tmp = x + dt * (Dopri::b1 * k1 + Dopri::b3 * k3 + Dopri::b4 * k4 +
                                Dopri::b5 * k5 + Dopri::b6 * k6);
                apply_generator(gen, tmp, k7);
                err = dt * (Dopri::e1 * k1 + Dopri::e3 * k3 + Dopri::e4 * k4 + Dopri::e5 * k5 +
                            Dopri::e6 * k6 + Dopri::e7 * k7);
                const double xmax = x.cwiseAbs().maxCoeff();
                const double scale = cfg.abs_tol + cfg.rel_tol * std::max(1.0, xmax);
                const double errn = err.cwiseAbs().maxCoeff() / scale;
                if (errn <= 1.0) {
                    t += dt;
                    x = tmp;
                    k1 = k7; // FSAL
                    if (++hermitize_counter % 100 == 0)
                        for (int c = 0; c < k; ++c)
                            if (physical[c]) hermitize_column(x, c, d);
                    if (hermitize_counter % 100 == 0) apply_generator(gen, x, k1);
                    if (t >= next_record || t >= duration * (1.0 - 1e-12)) {
                        record_all(t);
                        while (next_record <= t) next_record += record_interval;
                    }
                }
                const double factor =
                    std::clamp(0.9 * std::pow(std::max(errn, 1e-12), -0.2), 0.2, 5.0);
                dt = std::min(dt * factor, dt_max);
                if (dt <= 0.0 || !std::isfinite(dt))
                    throw StepSizeError("adaptive integrator: step size underflow");
            }
        }
    }

    for (int c = 0; c < k; ++c) {
        out[c].final_block = ex.column_as_matrix(x, c);
        if (physical[c]) {
            Matrix rho = 0.5 * (out[c].final_block + out[c].final_block.adjoint());
            out[c].final_state = QuantumState::density(layout, std::move(rho));
        }
    }
    return out;
}

} // namespace

std::vector<Trajectory> evolve_generator_batch(const SparseGen& gen, const HilbertLayout& layout,
                                               const std::vector<Matrix>& initial,
                                               const std::vector<bool>& physical, double duration,
                                               const IntegratorConfig& config, double scale_hint) {
    if (scale_hint > 0.0) enforce_step_bound(config.dt, scale_hint);
    IntegratorConfig cfg = config;
    try {
        return run_batch(gen, layout, initial, physical, duration, cfg);
    } catch (const PhysicalityViolation& v) {
        cfg.dt *= 0.5; // one retry at half step
        try {
            return run_batch(gen, layout, initial, physical, duration, cfg);
        } catch (const PhysicalityViolation& v2) {
            throw StepSizeError("evolution violated state invariants even after halving dt: " +
                                v2.what);
        }
    }
}

} // namespace detail

namespace {

// Dense slow path for genuinely time-dependent Hamiltonians.
Trajectory evolve_time_dependent(const QuantumState& state, const HamiltonianSource& source,
                                 const DissipatorSet& dissipators, double duration,
                                 const IntegratorConfig& cfg) {
    const HilbertLayout layout = state.layout();
    const int d = layout.dim();
    std::vector<std::pair<Matrix, double>> channels = detail::channel_matrices(dissipators);
    std::vector<Matrix> ldl;
    for (auto& [l, rate] : channels) ldl.push_back(l.adjoint() * l);

    auto rhs = [&](const Matrix& rho, double t) {
        Matrix h = source.at(t);
        Matrix out = Complex(0, -1) * (h * rho - rho * h);
        for (size_t i = 0; i < channels.size(); ++i) {
            const auto& [l, rate] = channels[i];
            out += rate * (l * rho * l.adjoint() - 0.5 * (ldl[i] * rho + rho * ldl[i]));
        }
        return out;
    };

    Matrix rho = state.density_matrix();
    const long n_steps = std::max<long>(1, long(std::ceil(duration / cfg.dt - 1e-9)));
    const double dt = duration / double(n_steps);

    Trajectory traj;
    const detail::Extractor ex(layout);
    detail::RowMat view(size_t(d) * d, 1);
    auto record = [&](double t) {
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) view(size_t(j) * d + i, 0) = rho(i, j);
        ex.record(view, 0, true, cfg.check_positivity, t, traj);
    };
    record(0.0);
    const int stride = std::max(1, cfg.record_stride > 0
                                       ? cfg.record_stride
                                       : int(std::llround(0.5e-9 / dt)));
    for (long step = 1; step <= n_steps; ++step) {
        const double t = double(step - 1) * dt;
        Matrix k1 = rhs(rho, t);
        Matrix k2 = rhs(rho + 0.5 * dt * k1, t + 0.5 * dt);
        Matrix k3 = rhs(rho + 0.5 * dt * k2, t + 0.5 * dt);
        Matrix k4 = rhs(rho + dt * k3, t + dt);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (step % 100 == 0 && step != n_steps) rho = 0.5 * (rho + Matrix(rho.adjoint()));
        if (step % stride == 0 || step == n_steps) record(double(step) * dt);
    }
    traj.final_block = rho;
    traj.final_state = QuantumState::density(layout, Matrix(0.5 * (rho + rho.adjoint())));
    return traj;
}

} // namespace

Trajectory evolve_lindblad(const QuantumState& state, const HamiltonianSource& hamiltonian,
                           const DissipatorSet& dissipators, double duration,
                           const IntegratorConfig& config) {
    if (state.layout() != hamiltonian.layout())
        throw DimensionMismatch("evolve_lindblad: state and Hamiltonian layouts differ");
    for (const auto& dis : dissipators)
        if (dis.jump.layout != state.layout())
            throw DimensionMismatch("evolve_lindblad: dissipator layout mismatch");

    if (!hamiltonian.constant()) {
        const double scale =
            detail::generator_scale(hamiltonian.at(0.0), dissipators);
        if (scale > 0.0 && config.dt > 0.02 / scale * (1.0 + 1e-9))
            throw StepSizeError("evolve_lindblad: dt exceeds 0.02/scale for the generator");
        return evolve_time_dependent(state, hamiltonian, dissipators, duration, config);
    }

    const Matrix& h = hamiltonian.static_matrix();
    const double scale = detail::generator_scale(h, dissipators);
    const auto gen = detail::lindblad_generator(h, h, detail::channel_matrices(dissipators));
    auto trajs = detail::evolve_generator_batch(gen, state.layout(), {state.density_matrix()},
                                                {true}, duration, config, scale);
    return std::move(trajs.front());
}

Trajectory evolve_schrodinger(const QuantumState& state, const HamiltonianSource& hamiltonian,
                              double duration, const IntegratorConfig& config) {
    if (!state.is_pure())
        throw DimensionMismatch("evolve_schrodinger: pure state input required");
    if (state.layout() != hamiltonian.layout())
        throw DimensionMismatch("evolve_schrodinger: state and Hamiltonian layouts differ");

    const HilbertLayout layout = state.layout();
    const bool constant = hamiltonian.constant();
    detail::SparseGen hs;
    double scale = 0.0;
    if (constant) {
        hs = detail::sparse_from_dense(hamiltonian.static_matrix());
        scale = detail::generator_scale(hamiltonian.static_matrix(), {});
    } else {
        scale = detail::generator_scale(hamiltonian.at(0.0), {});
    }
    if (scale > 0.0 && config.dt > 0.02 / scale * (1.0 + 1e-9))
        throw StepSizeError("evolve_schrodinger: dt exceeds 0.02/scale for the Hamiltonian");

    Vector psi = state.ket();
    const Complex mi(0.0, -1.0);
    auto rhs = [&](const Vector& v, double t) -> Vector {
        if (constant) return mi * (hs * v);
        return mi * (hamiltonian.at(t) * v);
    };

    const long n_steps = std::max<long>(1, long(std::ceil(duration / config.dt - 1e-9)));
    const double dt = duration > 0.0 ? duration / double(n_steps) : 0.0;
    const int stride = std::max(1, config.record_stride > 0
                                       ? config.record_stride
                                       : int(std::llround(0.5e-9 / std::max(dt, 1e-30))));

    Trajectory traj;
    const detail::Extractor ex(layout);
    auto record = [&](double t) {
        // populate observables from |psi|
        traj.times.push_back(t);
        double norm2 = 0.0, occ = 0.0, sz = 0.0, top = 0.0;
        double jpm_pop[3] = {0.0, 0.0, 0.0};
        Complex amp(0.0, 0.0);
        for (int n = 0; n < ex.nc; ++n)
            for (int q = 0; q < ex.nq; ++q)
                for (int j = 0; j < ex.nj; ++j) {
                    const int idx = (n * ex.nq + q) * ex.nj + j;
                    const double p = std::norm(psi(idx));
                    norm2 += p;
                    occ += n * p;
                    if (layout.has_qubit()) sz += (q == 0 ? 1.0 : -1.0) * p;
                    if (layout.has_jpm()) jpm_pop[j] += p;
                    if (n == ex.nc - 1) top += p;
                    if (n + 1 < ex.nc)
                        amp += std::conj(psi(idx)) * std::sqrt(double(n + 1)) *
                               psi(((n + 1) * ex.nq + q) * ex.nj + j);
                }
        traj.trace_real.push_back(norm2);
        traj.trace_value.push_back(Complex(norm2, 0.0));
        traj.cavity_amplitude.push_back(amp);
        traj.cavity_occupation.push_back(occ);
        traj.top_fock_population.push_back(top);
        if (layout.has_qubit()) {
            traj.qubit_sz.push_back(sz);
            Eigen::Matrix2cd rq = Eigen::Matrix2cd::Zero();
            for (int q = 0; q < 2; ++q)
                for (int q2 = 0; q2 < 2; ++q2)
                    for (int n = 0; n < ex.nc; ++n)
                        for (int j = 0; j < ex.nj; ++j)
                            rq(q, q2) += psi((n * 2 + q) * ex.nj + j) *
                                         std::conj(psi((n * 2 + q2) * ex.nj + j));
            traj.qubit_states.push_back(rq);
        }
        if (layout.has_jpm()) {
            traj.jpm_ground.push_back(jpm_pop[0]);
            traj.jpm_excited.push_back(jpm_pop[1]);
            traj.jpm_measured.push_back(jpm_pop[2]);
        }
        if (traj.top_fock_population.back() > config.top_fock_tol)
            throw TruncationError("evolve_schrodinger: top Fock population " +
                                  std::to_string(traj.top_fock_population.back()));
        if (std::abs(norm2 - 1.0) > 1e-10)
            throw StepSizeError("evolve_schrodinger: norm drift " + std::to_string(norm2 - 1.0));
    };

    record(0.0);
    for (long step = 1; step <= n_steps && duration > 0.0; ++step) {
        const double t = double(step - 1) * dt;
        Vector k1 = rhs(psi, t);
        Vector k2 = rhs(psi + 0.5 * dt * k1, t + 0.5 * dt);
        Vector k3 = rhs(psi + 0.5 * dt * k2, t + 0.5 * dt);
        Vector k4 = rhs(psi + dt * k3, t + dt);
        psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (step % stride == 0 || step == n_steps) record(double(step) * dt);
    }
    traj.final_block = psi;
    traj.final_state = QuantumState::pure(layout, psi / psi.norm());
    return traj;
}

} // namespace jpm
