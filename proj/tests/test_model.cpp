// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include <doctest.h>

#include <cmath>

#include "rispa/errors.hpp"
#include "rispa/model.hpp"
#include "support.hpp"

using namespace rispa;
using rispa::testing::random_matrix;
using rispa::testing::random_phase;
using rispa::testing::random_vector;

TEST_CASE("composite with zero cascade is the direct channel padded with zeros")
{
    Rng rng(3);
    const CVector h0 = random_vector(rng, 3);
    const CMatrix H2 = random_matrix(rng, 3, 4);
    const CMatrix H = assemble_composite(h0, CVector::Zero(4), H2);
    CHECK(H.cols() == 5);
    CHECK(H.col(0) == h0);
    CHECK(H.rightCols(4).norm() == 0.0);
}

TEST_CASE("scalar Khatri-Rao composition")
{
    CVector h0(1), h1(1);
    h0 << 1.0;
    h1 << cplx(0, 1);
    CMatrix H2(1, 1);
    H2 << 2.0;
    const CMatrix H = assemble_composite(h0, h1, H2);
    CHECK(H(0, 0) == cplx(1, 0));
    CHECK(H(0, 1) == cplx(0, 2));
}

TEST_CASE("composite matches an entrywise loop")
{
    Rng rng(11);
    const CVector h0 = random_vector(rng, 2);
    const CVector h1 = random_vector(rng, 3);
    const CMatrix H2 = random_matrix(rng, 2, 3);
    const ChannelSample s(h0, h1, H2);
    for (int m = 0; m < 2; ++m) {
        CHECK(s.composite()(m, 0) == h0(m));
        for (int l = 0; l < 3; ++l)
            CHECK(std::abs(s.composite()(m, l + 1) - h1(l) * H2(m, l)) < 1e-15);
    }
    CHECK(s.shape() == ChannelShape{2, 3});
}

TEST_CASE("composite rejects mismatched dimensions")
{
    CHECK_THROWS_AS(assemble_composite(CVector::Zero(2), CVector::Zero(3), CMatrix::Zero(3, 3)), DimensionError);
    CHECK_THROWS_AS(assemble_composite(CVector::Zero(2), CVector::Zero(3), CMatrix::Zero(2, 2)), DimensionError);
}

TEST_CASE("scaling a sample scales the composite")
{
    Rng rng(5);
    const ChannelSample s(random_vector(rng, 2), random_vector(rng, 3), random_matrix(rng, 2, 3));
    const ChannelSample t = s.scaled(0.5);
    CHECK((t.composite() - 0.5 * s.composite()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(t.ris_bs() == s.ris_bs());
}

TEST_CASE("phase matrix invariants")
{
    CMatrix V = CMatrix::Ones(3, 2);
    CHECK_NOTHROW(PhaseMatrix{V});
    V(1, 1) = 1.1;
    CHECK_THROWS_AS(PhaseMatrix{V}, ParameterError);
    V(1, 1) = std::polar(1.0, 0.3);
    V(0, 1) = cplx(0, 1);
    CHECK_THROWS_AS(PhaseMatrix{V}, ParameterError);
}

TEST_CASE("observe without noise is exact and leaves the rng untouched")
{
    Rng rng(1);
    const CMatrix H = random_matrix(rng, 3, 4);
    const PhaseMatrix V = random_phase(rng, 3, 2);
    Rng a(42), b(42);
    const Observation obs = observe(H, V, 0.0, a);
    CHECK((obs.Y - H * V.values()).norm() == 0.0);
    CHECK(a() == b());
}

TEST_CASE("identity phases return the channel")
{
    // the ones first row only admits V = I when L = 0
    Rng rng(2);
    const CMatrix H = random_matrix(rng, 3, 1);
    const PhaseMatrix V(CMatrix::Identity(1, 1));
    Rng r(0);
    CHECK(observe(H, V, 0.0, r).Y == H);
}

TEST_CASE("observe rejects negative noise variance")
{
    Rng rng(1);
    CHECK_THROWS_AS(observe(CMatrix::Ones(1, 2), PhaseMatrix(CMatrix::Ones(2, 1)), -1.0, rng), ParameterError);
}

TEST_CASE("vec(Y) = A vec(H) + vec(N) for a seeded draw")
{
    Rng rng(9);
    const CMatrix H = random_matrix(rng, 2, 3);
    const PhaseMatrix V = random_phase(rng, 2, 2);
    Rng a(77), b(77);
    const Observation obs = observe(H, V, 0.3, a);
    const CMatrix N = draw_noise(2, 2, 0.3, b);
    const CVector expected = build_observation_matrix(V, 2) * vectorize(H) + vectorize(N);
    CHECK((obs.vec() - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("observation matrix special cases")
{
    Rng rng(4);
    const PhaseMatrix I(CMatrix::Ones(1, 1));
    CHECK(build_observation_matrix(I, 3) == CMatrix::Identity(3, 3));
    const PhaseMatrix V = random_phase(rng, 3, 2);
    CHECK(build_observation_matrix(V, 1) == V.values().transpose());
}

TEST_CASE("Kronecker identity holds for random shapes")
{
    Rng rng(123);
    std::uniform_int_distribution<int> dim(1, 8);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int M = dim(rng), L = dim(rng), Nv = dim(rng);
        const CMatrix H = random_matrix(rng, M, L + 1);
        const PhaseMatrix V = random_phase(rng, L, Nv);
        const CMatrix A = build_observation_matrix(V, M);
        REQUIRE(A.rows() == M * Nv);
        REQUIRE(A.cols() == M * (L + 1));
        worst = std::max(worst, (A * vectorize(H) - vectorize(H * V.values())).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("vectorize is column-major and invertible")
{
    CMatrix m(2, 2);
    m << 1.0, 2.0, 3.0, 4.0;
    const CVector v = vectorize(m);
    CHECK(v(1) == cplx(3.0));
    CHECK(v(2) == cplx(2.0));
    CHECK(unvectorize(v, 2, 2) == m);
    CHECK_THROWS_AS(unvectorize(v, 3, 2), DimensionError);
}

TEST_CASE("noise statistics")
{
    Rng rng(2024);
    const double var = 0.7;
    const CMatrix N = draw_noise(100, 1000, var, rng);
    const double n = static_cast<double>(N.size());
    const double total = N.cwiseAbs2().sum() / n;
    const double re = N.real().array().square().sum() / n;
    const double im = N.imag().array().square().sum() / n;
    CHECK(std::abs(total - var) / var < 0.02);
    CHECK(std::abs(re - var / 2) / (var / 2) < 0.02);
    CHECK(std::abs(im - var / 2) / (var / 2) < 0.02);
    CHECK(std::abs(N.mean()) < 0.01);
}

TEST_CASE("SNR conversion")
{
    CHECK(snr_to_noise_variance(0.0) == doctest::Approx(1.0));
    CHECK(snr_to_noise_variance(40.0) == doctest::Approx(1e-4));
    CHECK(snr_to_noise_variance(-10.0) == doctest::Approx(10.0));
}

TEST_CASE("NMSE examples")
{
    Rng rng(8);
    std::vector<CMatrix> truth{random_matrix(rng, 2, 3), random_matrix(rng, 2, 3)};
    CHECK(nmse(truth, truth) == 0.0);

    CMatrix H(1, 2);
    H << 1.0, 0.0;
    const std::vector<CMatrix> t{H}, e{CMatrix::Zero(1, 2)};
    CHECK(nmse(t, e) == doctest::Approx(0.5));

    const std::vector<CMatrix> none;
    CHECK_THROWS_AS(nmse(none, none), ParameterError);
    const std::vector<CMatrix> one{H};
    CHECK_THROWS_AS(nmse(one, none), DimensionError);
}

TEST_CASE("derived seeds are deterministic and distinct")
{
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
