// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "rispa/errors.hpp"
#include "rispa/estimators.hpp"
#include "rispa/gmm.hpp"
#include "support.hpp"

using namespace rispa;
using rispa::testing::random_matrix;
using rispa::testing::random_phase;
using rispa::testing::random_vector;
using rispa::testing::TempDir;

namespace {

GmmModel random_model(Rng& rng, std::size_t K, Eigen::Index d)
{
    GmmModel g;
    g.weights = RVector::Random(static_cast<Eigen::Index>(K)).cwiseAbs().array() + 0.1;
    g.weights /= g.weights.sum();
    for (std::size_t k = 0; k < K; ++k) {
        g.means.push_back(random_vector(rng, d));
        const CMatrix B = random_matrix(rng, d, d);
        g.covs.push_back(B * B.adjoint() + 0.1 * CMatrix::Identity(d, d));
    }
    return g;
}

// d x N draws from a mixture
CMatrix sample_mixture(Rng& rng, const GmmModel& g, Eigen::Index N)
{
    std::discrete_distribution<int> pick(g.weights.data(), g.weights.data() + g.weights.size());
    const Eigen::Index d = static_cast<Eigen::Index>(g.dim());
    CMatrix X(d, N);
    for (Eigen::Index n = 0; n < N; ++n) {
        const int k = pick(rng);
        const CMatrix L = g.covs[k].llt().matrixL();
        X.col(n) = g.means[k] + L * random_vector(rng, d);
    }
    return X;
}

} // namespace

TEST_CASE("single component EM is the closed-form fit")
{
    Rng data(1);
    const CMatrix X = random_matrix(data, 3, 50) + CMatrix::Constant(3, 50, cplx(0.5, -0.2));
    GmmFitOptions opts;
    opts.components = 1;
    opts.reg_floor = 1e-3;
    Rng r1(5), r2(99);
    const auto a = gmm_fit(X, opts, r1);
    const auto b = gmm_fit(X, opts, r2);

    const CVector mu = X.rowwise().mean();
    const CMatrix centered = X.colwise() - mu;
    CMatrix C = centered * centered.adjoint() / 50.0;
    C.diagonal().array() += 1e-3;
    CHECK((a.model.means[0] - mu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.model.covs[0] - C).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.model.weights(0) == doctest::Approx(1.0));
    CHECK((a.model.covs[0] - b.model.covs[0]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.floor == 1e-3);
}

TEST_CASE("two separated clusters are recovered")
{
    Rng rng(7);
    const Eigen::Index N = 400;
    CMatrix X(2, N);
    for (Eigen::Index n = 0; n < N; ++n) {
        CVector x = random_vector(rng, 2, 0.01);
        x(0) += n % 2 == 0 ? 10.0 : -10.0;
        X.col(n) = x;
    }
    GmmFitOptions opts;
    opts.components = 2;
    const auto fit = gmm_fit(X, opts, rng);
    const int plus = fit.model.means[0](0).real() > 0 ? 0 : 1;
    CHECK(std::abs(fit.model.means[plus](0) - cplx(10.0)) < 0.1);
    CHECK(std::abs(fit.model.means[1 - plus](0) - cplx(-10.0)) < 0.1);
    CHECK(std::abs(fit.model.weights(0) - 0.5) < 0.05);
}

TEST_CASE("EM objective never decreases and components stay valid")
{
    Rng rng(2024);
    for (std::size_t K : {2u, 4u, 8u}) {
        const GmmModel truth = random_model(rng, 3, 6);
        const CMatrix X = sample_mixture(rng, truth, 300);
        GmmFitOptions opts;
        opts.components = K;
        opts.tol = 0.0;
        opts.max_iter = 40;
        opts.reg_floor = 1e-4;
        const auto fit = gmm_fit(X, opts, rng);
        for (std::size_t i = 1; i < fit.objective.size(); ++i)
            CHECK(fit.objective[i] - fit.objective[i - 1] >= -1e-9 * std::abs(fit.objective[i - 1]));
        CHECK(std::abs(fit.model.weights.sum() - 1.0) < 1e-12);
        for (const auto& C : fit.model.covs) {
            CHECK((C - C.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
            Eigen::SelfAdjointEigenSolver<CMatrix> es(C);
            CHECK(es.eigenvalues().minCoeff() >= opts.reg_floor * (1 - 1e-9));
        }
    }
}

TEST_CASE("EM argument errors")
{
    Rng rng(1);
    GmmFitOptions opts;
    opts.components = 5;
    CHECK_THROWS_AS(gmm_fit(random_matrix(rng, 2, 3), opts, rng), ParameterError);
    opts.components = 0;
    CHECK_THROWS_AS(gmm_fit(random_matrix(rng, 2, 3), opts, rng), ParameterError);

    CMatrix bad = random_matrix(rng, 2, 10);
    bad(0, 3) = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    opts.components = 2;
    try {
        gmm_fit(bad, opts, rng);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
}

TEST_CASE("single zero-mean component reproduces the LMMSE estimate")
{
    Rng rng(33);
    const CMatrix B = random_matrix(rng, 8, 8);
    const CMatrix C = B * B.adjoint() / 8.0;
    GmmModel g;
    g.weights = RVector::Ones(1);
    g.means.push_back(CVector::Zero(8));
    g.covs.push_back(C);
    const PhaseMatrix V = random_phase(rng, 3, 2);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const CVector y = random_vector(rng, 4);
        const CVector a = gmm_estimate(y, V, 0.2, g);
        const CVector b = lmmse_sample_cov_estimate(y, V, 0.2, C);
        worst = std::max(worst, (a - b).norm() / b.norm());
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("responsibilities are a distribution even far from every component")
{
    Rng rng(4);
    const GmmModel g = random_model(rng, 5, 4);
    const PhaseMatrix V = random_phase(rng, 1, 2);
    for (double scale : {1.0, 1e3, 1e6}) {
        const CVector y = scale * random_vector(rng, 4);
        const RVector p = gmm_responsibilities(y, V, 0.01, g);
        CHECK(p.allFinite());
        CHECK((p.array() >= 0.0).all());
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("conditional mean matches quadrature on a scalar toy")
{
    GmmModel g;
    g.weights = RVector(2);
    g.weights << 0.3, 0.7;
    CVector m0(1), m1(1);
    m0 << cplx(1.0, -0.5);
    m1 << cplx(-0.8, 0.4);
    g.means = {m0, m1};
    g.covs = {CMatrix::Constant(1, 1, 0.4), CMatrix::Constant(1, 1, 0.9)};
    const double s2 = 0.25;
    const PhaseMatrix V(CMatrix::Ones(1, 1));

    for (const cplx yv : {cplx(0.3, 0.2), cplx(-1.5, 1.0), cplx(2.0, -2.0)}) {
        CVector y(1);
        y << yv;
        const cplx est = gmm_estimate(y, V, s2, g)(0);

        // E[h | y] on a grid over the complex plane
        const double lo = -8.0, hi = 8.0;
        const int n = 1601;
        const double step = (hi - lo) / (n - 1);
        cplx num = 0.0;
        double den = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const cplx h(lo + i * step, lo + j * step);
                double prior = 0.0;
                for (int k = 0; k < 2; ++k) {
                    const double c = g.covs[k](0, 0).real();
                    prior += g.weights(k) * std::exp(-std::norm(h - g.means[k](0)) / c) / (std::numbers::pi * c);
                }
                const double w = prior * std::exp(-std::norm(yv - h) / s2);
                num += w * h;
                den += w;
            }
        const cplx oracle = num / den;
        CHECK(std::abs(est - oracle) < 1e-6);
    }
}

TEST_CASE("bound estimator equals the one-shot estimate")
{
    Rng rng(6);
    const GmmModel g = random_model(rng, 3, 6);
    const PhaseMatrix V = random_phase(rng, 2, 2);
    const GmmEstimator est(g);
    const auto bound = est.bind(V, 0.1, 2);
    const CVector y = random_vector(rng, 4);
    CHECK((bound->estimate(y) - gmm_estimate(y, V, 0.1, g)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(bound->estimate(y).size() == 6);
}

TEST_CASE("model validation")
{
    Rng rng(2);
    GmmModel g = random_model(rng, 2, 3);
    CHECK_NOTHROW(g.validate());
    g.weights(0) += 0.5;
    CHECK_THROWS_AS(g.validate(), ParameterError);
    g = random_model(rng, 2, 3);
    g.covs.pop_back();
    CHECK_THROWS_AS(g.validate(), DimensionError);
}

TEST_CASE("GMM files round-trip and reject damage")
{
    TempDir dir("gmm");
    Rng rng(8);
    const GmmModel g = random_model(rng, 3, 4);
    save_gmm(g, dir / "g.rgmm");
    const GmmModel back = load_gmm(dir / "g.rgmm");
    CHECK(back.weights == g.weights);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(back.means[k] == g.means[k]);
        CHECK(back.covs[k] == g.covs[k]);
    }

    std::ifstream in(dir / "g.rgmm", std::ios::binary);
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), {}};
    bytes.resize(bytes.size() - 8);
    {
        std::ofstream out(dir / "short.rgmm", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    try {
        load_gmm(dir / "short.rgmm");
        FAIL("expected a truncation error");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::truncated);
    }
}
