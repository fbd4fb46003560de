#include "jpm/analysis.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace jpm {

double ChoiMatrix::min_eigenvalue() const {
    Matrix sym = 0.5 * (mat + mat.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void ChoiMatrix::validate(bool trace_preserving) const {
    if (hermiticity_defect() > 1e-8)
        throw NumericalError("ChoiMatrix: not Hermitian");
    if (trace_preserving && std::abs(trace() - 2.0) > 1e-6)
        throw NumericalError("ChoiMatrix: trace " + std::to_string(trace()) + " deviates from 2");
    if (min_eigenvalue() < -1e-8)
        throw NumericalError("ChoiMatrix: negative eigenvalue " +
                             std::to_string(min_eigenvalue()));
}

double contrast(double p_bright, double p_dark) {
    auto check = [](double p, const char* name) {
        if (p < 0.0 || p > 1.0)
            throw NumericalError(std::string("contrast: ") + name + " outside [0, 1]");
    };
    check(p_bright, "p_bright");
    check(p_dark, "p_dark");
    return p_bright - p_dark;
}

double bright_count_probability(double alpha_sq, double gamma_j, double gamma_r) {
    if (alpha_sq < 0.0 || gamma_j < 0.0 || gamma_r < 0.0)
        throw NumericalError("bright_count_probability: negative input");
    if (gamma_j == 0.0) return 0.0;
    return 1.0 - std::exp(-alpha_sq * gamma_j / (gamma_j + gamma_r));
}

double dark_count_probability(double gamma_d, double t_m) {
    if (gamma_d < 0.0 || t_m < 0.0)
        throw NumericalError("dark_count_probability: negative input");
    return 1.0 - std::exp(-gamma_d * t_m);
}

double analytic_detection_probability(double alpha_sq, double gamma_j, double gamma_r,
                                      double gamma_d, double t_m) {
    const double pb = bright_count_probability(alpha_sq, gamma_j, gamma_r);
    const double pd = dark_count_probability(gamma_d, t_m);
    return pb + (1.0 - pb) * pd;
}

double dephasing_factor(Complex alpha0, Complex alpha1) {
    return std::exp(-std::norm(alpha1 - alpha0));
}

double upper_incomplete_gamma_int(int n, double x) {
    if (n < 1) throw NumericalError("upper_incomplete_gamma_int: order must be >= 1");
    double g = std::exp(-x); // Gamma(1, x)
    double xpow = 1.0;       // x^{k-1} at k = 1
    for (int k = 2; k <= n; ++k) {
        xpow *= x;
        g = double(k - 1) * g + xpow * std::exp(-x);
    }
    return g;
}

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

} // namespace

double subtraction_probability(double alpha1_sq, int n) {
    return 1.0 - upper_incomplete_gamma_int(n, alpha1_sq) / factorial(n - 1);
}

double subtracted_mean_photons(double alpha1_sq, int n) {
    const double pn = subtraction_probability(alpha1_sq, n);
    if (pn <= 0.0)
        throw ZeroNormError("subtracted_mean_photons: no support above Fock level N-1");
    // Poisson tail: sum_{m >= N} (m - N) p_m with p_m = e^{-x} x^m / m!.
    const double x = alpha1_sq;
    double term = std::exp(-x);
    for (int m = 1; m <= n; ++m) term *= x / m; // p_N
    double mean = 0.0;
    int m = n;
    while (term > 0.0) {
        mean += (m - n) * term;
        ++m;
        term *= x / m;
        if (m > n + 20 && term < 1e-18 * std::max(mean, 1.0)) break;
        if (m > 1000000) throw ConvergenceError("subtracted_mean_photons: series stalled");
    }
    return mean / pn;
}

double reset_error(Complex alpha1, int n) {
    if (n < 1) throw NumericalError("reset_error: N must be >= 1");
    const double x = std::norm(alpha1); // depends on |alpha1| only
    const double a1 = std::sqrt(x);
    const double pn = subtraction_probability(x, n);
    if (pn <= 0.0)
        throw ZeroNormError("reset_error: subtraction probability vanished");
    const double am = std::sqrt(subtracted_mean_photons(x, n));
    // overlap <alpha_M| B_-^N |alpha_1> =
    //   e^{-(|aM|^2+|a1|^2)/2} sum_n aM^n a1^{n+N} / sqrt(n! (n+N)!)
    const double pref = std::exp(-0.5 * (am * am + x));
    double term = std::pow(a1, n) / std::sqrt(factorial(n)); // n = 0 summand
    double sum = 0.0;
    int k = 0;
    while (true) {
        sum += term;
        const double ratio = am * a1 / std::sqrt(double(k + 1) * double(k + 1 + n));
        term *= ratio;
        ++k;
        if (ratio < 1.0) {
            const double tail_bound = term / (1.0 - ratio);
            if (tail_bound < 1e-12) break;
        }
        if (k > 100000)
            throw ConvergenceError("reset_error: series tail bound 1e-12 not met");
    }
    const double overlap = pref * sum;
    double e = 1.0 - overlap * overlap / pn;
    if (e < 0.0 && e > -1e-12) e = 0.0;
    return e;
}

QuantumState subtraction_backaction(const QuantumState& cavity, int n, BackactionKind kind) {
    if (cavity.layout().has_qubit() || cavity.layout().has_jpm())
        throw DimensionMismatch("subtraction_backaction: cavity-only state expected");
    if (n < 0) throw NumericalError("subtraction_backaction: N must be >= 0");
    const int nf = cavity.layout().n_fock();
    if (cavity.is_pure()) {
        Vector c = cavity.ket();
        for (int rep = 0; rep < n; ++rep) {
            Vector shifted = Vector::Zero(nf);
            for (int m = 0; m + 1 < nf; ++m) {
                const double w = kind == BackactionKind::Subtraction ? 1.0 : std::sqrt(double(m + 1));
                shifted(m) = w * c(m + 1);
            }
            c = shifted;
        }
        const double norm = c.norm();
        if (norm < 1e-300)
            throw ZeroNormError("subtraction_backaction: state annihilated");
        c /= norm;
        return QuantumState::pure(cavity.layout(), std::move(c));
    }
    Matrix b = Matrix::Zero(nf, nf);
    for (int m = 1; m < nf; ++m)
        b(m - 1, m) = kind == BackactionKind::Subtraction ? 1.0 : std::sqrt(double(m));
    Matrix rho = cavity.rho();
    for (int rep = 0; rep < n; ++rep) rho = b * rho * b.adjoint();
    const double tr = rho.trace().real();
    if (tr < 1e-300) throw ZeroNormError("subtraction_backaction: state annihilated");
    rho /= tr;
    return QuantumState::density(cavity.layout(), std::move(rho));
}

ChoiMatrix choi_from_outputs(const TomographyOutputs& t) {
    using M2 = Eigen::Matrix2cd;
    const Complex i(0.0, 1.0);
    // E(|0><1|) = (A + i B)/2 with A = 2E(+) - E(0) - E(1),
    //             B = 2E(+i) - E(0) - E(1).
    const M2 a = 2.0 * t.out_plus - t.out0 - t.out1;
    const M2 b = 2.0 * t.out_plus_i - t.out0 - t.out1;
    const M2 e01 = 0.5 * (a + i * b);
    const M2 e10 = e01.adjoint();
    Matrix c = Matrix::Zero(4, 4);
    auto put = [&](int in_i, int in_k, const M2& block) {
        for (int j = 0; j < 2; ++j)
            for (int l = 0; l < 2; ++l) c(2 * in_i + j, 2 * in_k + l) = block(j, l);
    };
    put(0, 0, t.out0);
    put(1, 1, t.out1);
    put(0, 1, e01);
    put(1, 0, e10);
    return ChoiMatrix(std::move(c));
}

ChoiMatrix choi_from_channel(const QubitChannel& channel) {
    using M2 = Eigen::Matrix2cd;
    M2 p0 = M2::Zero(), p1 = M2::Zero(), pp, ppi;
    p0(0, 0) = 1.0;
    p1(1, 1) = 1.0;
    pp << 0.5, 0.5, 0.5, 0.5;
    ppi << 0.5, Complex(0.0, -0.5), Complex(0.0, 0.5), 0.5;
    TomographyOutputs t{channel(p0), channel(p1), channel(pp), channel(ppi)};
    return choi_from_outputs(t);
}

ChoiMatrix perfect_qnd_choi() {
    Matrix c = Matrix::Zero(4, 4);
    c(0, 0) = 1.0;
    c(3, 3) = 1.0;
    return ChoiMatrix(std::move(c));
}

double ideal_pointer_overlap(Complex alpha0, Complex alpha1) {
    const double x0 = std::norm(alpha0);
    const double x1 = std::norm(alpha1);
    return std::exp(-0.5 * (x0 + x1)) +
           std::sqrt((1.0 - std::exp(-x0)) * (1.0 - std::exp(-x1)));
}

ChoiMatrix ideal_protocol_choi(Complex alpha0, Complex alpha1) {
    const double k = ideal_pointer_overlap(alpha0, alpha1);
    Matrix c = Matrix::Zero(4, 4);
    c(0, 0) = 1.0;
    c(3, 3) = 1.0;
    c(0, 3) = k;
    c(3, 0) = k;
    return ChoiMatrix(std::move(c));
}

double process_fidelity(const ChoiMatrix& c1, const ChoiMatrix& c2) {
    const double t1 = c1.trace();
    const double t2 = c2.trace();
    if (t1 <= 0.0 || t2 <= 0.0)
        throw NumericalError("process_fidelity: nonpositive trace");
    Matrix s1 = psd_sqrt(c1.mat);
    Matrix inner = psd_sqrt(s1 * c2.mat * s1);
    const double tr = inner.trace().real();
    return tr * tr / (t1 * t2);
}

double analytic_ideal_fidelity(Complex alpha0, Complex alpha1) {
    double k = ideal_pointer_overlap(alpha0, alpha1);
    if (k > 1.0) k = 1.0;
    return 0.5 * (1.0 + std::sqrt(1.0 - k * k));
}

ConditionalStates conditional_states(Complex a, Complex b, Complex alpha0, Complex alpha1) {
    const double norm_in = std::norm(a) + std::norm(b);
    if (std::abs(norm_in - 1.0) > 1e-10)
        throw NumericalError("conditional_states: input qubit state not normalized");
    const double x0 = std::norm(alpha0);
    const double x1 = std::norm(alpha1);
    const double p0 = std::norm(a) * std::exp(-x0) + std::norm(b) * std::exp(-x1);
    const double p1 = std::norm(a) * (1.0 - std::exp(-x0)) + std::norm(b) * (1.0 - std::exp(-x1));
    if (p0 <= 0.0 || p1 <= 0.0)
        throw DegenerateBranchError("conditional_states: a measurement branch has zero probability");
    ConditionalStates out;
    out.p_no_click = p0;
    out.p_click = p1;
    out.no_click << a * std::exp(-0.5 * x0) / std::sqrt(p0), b * std::exp(-0.5 * x1) / std::sqrt(p0);
    out.click << a * std::sqrt(1.0 - std::exp(-x0)) / std::sqrt(p1),
        b * std::sqrt(1.0 - std::exp(-x1)) / std::sqrt(p1);
    out.overlap = out.no_click.dot(out.click); // conjugates the left argument
    return out;
}

LifetimeReport qubit_lifetimes(const SystemParams& p, int n) {
    if (n < 0) throw NumericalError("qubit_lifetimes: photon number must be >= 0");
    LifetimeReport r;
    r.n = n;
    const double delta = p.detuning();
    const double ratio_sq = (p.g_q / delta) * (p.g_q / delta);
    r.dispersive_ok = std::abs(p.g_q / delta) <= 0.1;
    // Purcell channel through the cavity port, Ohmic-weighted at the
    // dressed qubit frequency.
    const double kappa_eff = p.kappa * (p.omega_q + p.chi_q()) / p.omega_c;
    r.rate_kappa = kappa_eff * ratio_sq;
    r.t1_kappa = 1.0 / r.rate_kappa;
    // JPM-mediated channel during measurement. The n = 0 matrix element is
    // g^2/(2 Delta^2); for n >= 1 the lifetime follows the
    // (sqrt(n) + sqrt(n+1))^2 family exactly.
    if (n == 0) {
        r.rate_gamma_r = p.gamma_r * 0.5 * ratio_sq;
        r.t1_gamma_r = 1.0 / r.rate_gamma_r;
    } else {
        const double family = (std::sqrt(double(n)) + std::sqrt(double(n + 1)));
        r.t1_gamma_r = family * family / (p.gamma_r * ratio_sq);
        r.rate_gamma_r = 1.0 / r.t1_gamma_r;
    }
    return r;
}

} // namespace jpm
