#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "jpm/hilbert.hpp"

using namespace jpm;

namespace {

// Independent Poisson-statistics oracle over explicit coefficients.
double poisson_mean_photons(double alpha_abs, int n_fock) {
    double mean = 0.0, norm = 0.0;
    double p = std::exp(-alpha_abs * alpha_abs); // |c_0|^2
    for (int n = 0; n < n_fock; ++n) {
        norm += p;
        mean += n * p;
        p *= alpha_abs * alpha_abs / double(n + 1);
    }
    return mean / norm;
}

} // namespace

TEST_CASE("layout dimensions and indexing") {
    HilbertLayout full = HilbertLayout::full(5);
    CHECK(full.dim() == 5 * 2 * 3);
    CHECK(full.index(2, 1, 2) == (2 * 2 + 1) * 3 + 2);
    CHECK(HilbertLayout::cavity_only(7).dim() == 7);
    CHECK(HilbertLayout::cavity_qubit(7).dim() == 14);
    CHECK_THROWS_AS(HilbertLayout(0, true, true), DimensionMismatch);
}

TEST_CASE("annihilation acts exactly as sqrt(n) shift") {
    const int nf = 12;
    Matrix a = annihilation_matrix(nf);
    for (int n = 1; n < nf; ++n) {
        Vector fock = Vector::Zero(nf);
        fock(n) = 1.0;
        Vector lowered = a * fock;
        CHECK(lowered(n - 1) == Complex(std::sqrt(double(n)), 0.0)); // exact
        lowered(n - 1) = 0.0;
        CHECK(lowered.norm() == 0.0);
    }
}

TEST_CASE("coherent state: vacuum limit") {
    QuantumState vac = coherent_state(0.0, 10);
    CHECK(vac.ket()(0) == Complex(1.0, 0.0));
    CHECK(vac.ket().tail(9).norm() == 0.0);
}

TEST_CASE("coherent state: mean photon number matches the Poisson oracle") {
    const double target = poisson_mean_photons(std::sqrt(10.0), 40);
    QuantumState st = coherent_state(std::sqrt(10.0), 40);
    double mean = 0.0;
    for (int n = 0; n < 40; ++n) mean += n * std::norm(st.ket()(n));
    CHECK(mean == doctest::Approx(target).epsilon(1e-12));
    CHECK(mean == doctest::Approx(10.0).epsilon(1e-7)); // = 10.0 +- 1e-6
}

TEST_CASE("coherent state: vacuum weight is the closed-form Poisson factor") {
    QuantumState st = coherent_state(1.0, 12);
    CHECK(std::norm(st.ket()(0)) == doctest::Approx(std::exp(-1.0)).epsilon(2e-8));
}

TEST_CASE("coherent state: truncation rule enforced") {
    CHECK_THROWS_AS(coherent_state(4.0, 20), TruncationError);
    CHECK_NOTHROW(coherent_state(4.0, required_fock_dim(4.0)));
}

TEST_CASE("displacement: zero displacement is the identity") {
    Operator d = displacement(0.0, 8);
    CHECK((d.mat - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("displacement generates coherent states from vacuum") {
    const Complex beta(2.0, 0.0);
    const int nf = required_fock_dim(2.0);
    Operator d = displacement(beta, nf);
    Vector vac = Vector::Zero(nf);
    vac(0) = 1.0;
    Vector displaced = d.mat * vac;
    QuantumState target = coherent_state(beta, nf);
    CHECK(std::norm(target.ket().dot(displaced)) > 1.0 - 1e-8);
}

TEST_CASE("displacement inverse returns a coherent state to vacuum") {
    const Complex alpha(1.5, 0.0);
    const int nf = required_fock_dim(1.5);
    QuantumState coh = coherent_state(alpha, nf);
    Vector res = displacement(-alpha, nf).mat * coh.ket();
    CHECK(std::norm(res(0)) > 1.0 - 1e-8);
}

TEST_CASE("displacement is unitary on the low-energy subspace") {
    const Complex beta(1.2, -0.7);
    const int nf = required_fock_dim(std::abs(beta));
    Operator d = displacement(beta, nf);
    Matrix defect = d.mat.adjoint() * d.mat - Matrix::Identity(nf, nf);
    const int guard = int(std::norm(beta) + 3.0 * std::abs(beta));
    CHECK(defect.topLeftCorner(guard, guard).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("embed: qubit identity gives the global identity") {
    HilbertLayout lay = HilbertLayout::full(4);
    Operator op = embed(Matrix::Identity(2, 2), Subsystem::Qubit, lay);
    CHECK((op.mat - Matrix::Identity(lay.dim(), lay.dim())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("embed: canonical commutator below the top Fock level") {
    HilbertLayout lay = HilbertLayout::cavity_qubit(6);
    Matrix a = embed(annihilation_matrix(6), Subsystem::Cavity, lay).mat;
    Matrix comm = a * a.adjoint() - a.adjoint() * a;
    // identity on every sector not touching n = n_fock - 1
    for (int n = 0; n < 5; ++n)
        for (int q = 0; q < 2; ++q) {
            const int idx = lay.index(n, q);
            CHECK(comm(idx, idx) == Complex(1.0, 0.0));
        }
}

TEST_CASE("embed: mean photon number of a coherent product state") {
    const int nf = 40;
    HilbertLayout lay = HilbertLayout::full(nf);
    Vector qubit = Vector::Zero(2);
    qubit(0) = 1.0;
    Vector jpm = Vector::Zero(3);
    jpm(0) = 1.0;
    QuantumState st = product_state(lay, coherent_state(std::sqrt(10.0), nf).ket(), qubit, jpm);
    Matrix num = embed(number_matrix(nf), Subsystem::Cavity, lay).mat;
    CHECK(st.expectation(num).real() == doctest::Approx(10.0).epsilon(1e-7));
}

TEST_CASE("embed preserves spectra with multiplicity") {
    HilbertLayout lay = HilbertLayout::cavity_qubit(4);
    Matrix local(2, 2);
    local << 0.3, 0.0, 0.0, 1.7;
    Operator op = embed(local, Subsystem::Qubit, lay);
    Eigen::ComplexEigenSolver<Matrix> es(op.mat);
    std::vector<double> ev;
    for (int i = 0; i < op.dim(); ++i) ev.push_back(es.eigenvalues()(i).real());
    std::sort(ev.begin(), ev.end());
    for (int i = 0; i < 4; ++i) CHECK(ev[i] == doctest::Approx(0.3).epsilon(1e-12));
    for (int i = 4; i < 8; ++i) CHECK(ev[i] == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("embedded operators on different subsystems commute") {
    HilbertLayout lay = HilbertLayout::full(5);
    Matrix a = embed(annihilation_matrix(5), Subsystem::Cavity, lay).mat;
    Matrix sx = embed(pauli_x(), Subsystem::Qubit, lay).mat;
    Matrix jl = embed(jpm_lower(), Subsystem::Jpm, lay).mat;
    CHECK((a * sx - sx * a).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((a * jl - jl * a).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((sx * jl - jl * sx).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("embed rejects mismatched local dimensions") {
    HilbertLayout lay = HilbertLayout::cavity_qubit(4);
    CHECK_THROWS_AS(embed(Matrix::Identity(3, 3), Subsystem::Qubit, lay), DimensionMismatch);
    CHECK_THROWS_AS(embed(Matrix::Identity(3, 3), Subsystem::Jpm, lay), DimensionMismatch);
}

TEST_CASE("partial trace of a product state recovers the factors") {
    const int nf = 17;
    HilbertLayout lay = HilbertLayout::cavity_qubit(nf);
    Vector qubit(2);
    qubit << std::sqrt(0.3), std::sqrt(0.7);
    QuantumState st = product_state(lay, coherent_state(1.0, nf).ket(), qubit);
    Matrix rq = partial_trace(st, Subsystem::Qubit);
    CHECK(rq(0, 0).real() == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rq(1, 1).real() == doctest::Approx(0.7).epsilon(1e-12));
    Matrix rc = partial_trace(st, Subsystem::Cavity);
    CHECK(rc.trace().real() == doctest::Approx(1.0).epsilon(1e-12));
    Matrix rc2 = trace_out(st.density_matrix(), lay, Subsystem::Qubit);
    CHECK((rc - rc2).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("partial trace of an entangled state is maximally mixed") {
    HilbertLayout lay = HilbertLayout::cavity_qubit(2);
    Vector psi = Vector::Zero(4);
    psi(lay.index(0, 0)) = 1.0 / std::sqrt(2.0);
    psi(lay.index(1, 1)) = 1.0 / std::sqrt(2.0);
    QuantumState st = QuantumState::pure(lay, psi);
    Matrix rq = partial_trace(st, Subsystem::Qubit);
    CHECK((rq - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("state validation enforces the representation invariants") {
    HilbertLayout lay = HilbertLayout::cavity_only(3);
    Vector bad = Vector::Ones(3);
    CHECK_THROWS_AS(QuantumState::pure(lay, bad), NumericalError);
    Matrix rho = Matrix::Identity(3, 3); // trace 3
    CHECK_THROWS_AS(QuantumState::density(lay, rho), NumericalError);
    Matrix neg = Matrix::Zero(3, 3);
    neg(0, 0) = 1.5;
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS(QuantumState::density(lay, neg), NumericalError);
}

TEST_CASE("state fidelity: pure overlap and Uhlmann form agree") {
    HilbertLayout lay = HilbertLayout::cavity_only(16);
    QuantumState a = coherent_state(0.5, 16);
    QuantumState b = coherent_state(Complex(0.0, 0.5), 16);
    const double pure = state_fidelity(a, b);
    const double mixed = state_fidelity(a.to_density(), b.to_density());
    CHECK(pure == doctest::Approx(mixed).epsilon(1e-9));
    // |<alpha|beta>|^2 = exp(-|alpha-beta|^2)
    CHECK(pure == doctest::Approx(std::exp(-std::norm(Complex(0.5, -0.5)))).epsilon(1e-9));
    CHECK(state_fidelity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("psd_sqrt clamps tiny negatives and rejects real ones") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 4.0;
    m(1, 1) = -1e-9; // clamped
    Matrix r = psd_sqrt(m);
    CHECK(r(0, 0).real() == doctest::Approx(2.0).epsilon(1e-12));
    m(1, 1) = -1e-3;
    CHECK_THROWS_AS(psd_sqrt(m), NumericalError);
}

TEST_CASE("operator hermiticity check") {
    HilbertLayout lay = HilbertLayout::cavity_only(4);
    Operator n{lay, number_matrix(4)};
    CHECK(n.is_hermitian());
    Operator a{lay, annihilation_matrix(4)};
    CHECK(!a.is_hermitian());
}
