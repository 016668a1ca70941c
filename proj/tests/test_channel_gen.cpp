// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "rispa/binary_io.hpp"
#include "rispa/channel_gen.hpp"
#include "rispa/errors.hpp"
#include "support.hpp"

using namespace rispa;
using rispa::testing::TempDir;

namespace {

bool same_samples(const ChannelDataset& a, const ChannelDataset& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.samples[i];
        const auto& y = b.samples[i];
        if (x.direct() != y.direct() || x.mt_ris() != y.mt_ris() || x.ris_bs() != y.ris_bs())
            return false;
    }
    return true;
}

std::vector<char> slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes)
{
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("steering vectors")
{
    const CVector a = ula_steering(5, 0.4);
    for (Eigen::Index m = 0; m < a.size(); ++m) {
        CHECK(std::abs(std::abs(a(m)) - 1.0) < 1e-15);
        const cplx expected = std::polar(1.0, std::numbers::pi * static_cast<double>(m) * std::sin(0.4));
        CHECK(std::abs(a(m) - expected) < 1e-14);
    }
    const CVector u = ura_steering(2, 3, 0.3, -0.2);
    CHECK(u.size() == 6);
    CHECK((u.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK(std::abs(u(0) - 1.0) < 1e-15);
}

TEST_CASE("generation is deterministic in the seed")
{
    ScenarioConfig cfg;
    const auto a = generate(cfg, 20);
    const auto b = generate(cfg, 20);
    CHECK(same_samples(a, b));
    cfg.seed = 2;
    CHECK_FALSE(same_samples(a, generate(cfg, 20)));
    CHECK(a.shape == ChannelShape{4, 8});
    CHECK(a.samples.front().composite().cols() == 9);
}

TEST_CASE("prefix of a larger dataset is the smaller dataset")
{
    ScenarioConfig cfg;
    const auto small = generate(cfg, 5);
    auto large = generate(cfg, 9);
    large.samples.resize(5);
    CHECK(same_samples(small, large));
}

TEST_CASE("pure LOS limit gives one rank-1 RIS-BS channel")
{
    ScenarioConfig cfg;
    cfg.direct_clusters = 1;
    cfg.angle_spread_deg = 0.0;
    cfg.rician_k = std::numeric_limits<double>::infinity();
    const auto ds = generate(cfg, 10);
    const CMatrix& H2 = ds.samples.front().ris_bs();
    for (const auto& s : ds.samples)
        CHECK(s.ris_bs() == H2);
    Eigen::JacobiSVD<CMatrix> svd(H2);
    const auto sv = svd.singularValues();
    CHECK(sv(1) < 1e-10 * sv(0));
}

TEST_CASE("invalid scenario configs are rejected")
{
    ScenarioConfig cfg;
    cfg.ris_rows = 3; // 3 x 4 != 8
    CHECK_THROWS_AS(generate(cfg, 1), ParameterError);
    cfg = ScenarioConfig{};
    cfg.direct_clusters = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = ScenarioConfig{};
    cfg.rician_k = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("normalization")
{
    ScenarioConfig cfg;
    const auto raw = generate(cfg, 10000);
    const auto ds = normalize(raw);
    const double target = static_cast<double>(cfg.shape.composite_dim());
    CHECK(std::abs(ds.second_moment() - target) / target < 1e-9);
    CHECK(ds.normalized);
    CHECK(std::abs(normalization_factor(ds) - 1.0) < 1e-12);

    // recomputed directly
    double sum = 0.0;
    for (const auto& s : ds.samples)
        sum += s.composite().squaredNorm();
    CHECK(std::abs(sum / 10000.0 - target) / target < 1e-9);
}

TEST_CASE("normalization factor closed form and degenerate data")
{
    const std::size_t M = 2, L = 3;
    ChannelDataset ds;
    ds.shape = {M, L};
    // ||vec(H)||^2 = 4 M (L+1): every entry has modulus 2 when h1 = 2 and H2 = 1
    ds.samples.emplace_back(CVector::Constant(M, 2.0), CVector::Constant(L, 2.0), CMatrix::Ones(M, L));
    CHECK(normalization_factor(ds) == doctest::Approx(0.5).epsilon(1e-14));

    ChannelDataset zero;
    zero.shape = {M, L};
    zero.samples.emplace_back(CVector::Zero(M), CVector::Zero(L), CMatrix::Ones(M, L));
    CHECK_THROWS_AS(normalize(zero), DegenerateDataError);
}

TEST_CASE("dataset files round-trip bit-exactly")
{
    TempDir dir("dataset");
    ScenarioConfig cfg;
    cfg.seed = 17;
    const auto ds = normalize(generate(cfg, 12));
    save(ds, dir / "d.risd");
    const auto back = load(dir / "d.risd");
    CHECK(same_samples(ds, back));
    CHECK(back.normalized);
    CHECK(back.shape == ds.shape);
    CHECK_FALSE(back.scenario.has_value());
}

TEST_CASE("dataset format errors")
{
    TempDir dir("badfile");
    ScenarioConfig cfg;
    const auto ds = generate(cfg, 2);
    save(ds, dir / "ok.risd");
    const auto bytes = slurp(dir / "ok.risd");

    auto magic = bytes;
    magic[0] = 'X';
    spit(dir / "magic.risd", magic);
    try {
        load(dir / "magic.risd");
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::bad_magic);
    }

    const std::size_t per_sample = (4 + 8 + 4 * 8) * 16;
    auto truncated = bytes;
    truncated.resize(bytes.size() - per_sample);
    spit(dir / "short.risd", truncated);
    try {
        load(dir / "short.risd");
        FAIL("expected a truncation error");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::truncated);
    }

    auto trailing = bytes;
    trailing.push_back(0);
    spit(dir / "long.risd", trailing);
    try {
        load(dir / "long.risd");
        FAIL("expected an inconsistency error");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::inconsistent);
    }

    auto version = bytes;
    version[4] = 9;
    spit(dir / "version.risd", version);
    try {
        load(dir / "version.risd");
        FAIL("expected a version error");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::bad_version);
    }

    CHECK_THROWS_AS(load(dir / "missing.risd"), IoError);
}

TEST_CASE("externally written files load")
{
    // hand-built file: M=1, L=1, one sample
    TempDir dir("external");
    {
        binio::Writer w(dir / "ext.risd");
        w.magic("RISD");
        w.u16(1);
        w.u32(1);
        w.u32(1);
        w.u64(1);
        w.u8(0);
        w.c128({1.0, 0.0});
        w.c128({0.0, 1.0});
        w.c128({2.0, 0.0});
        w.finish();
    }
    const auto ds = load(dir / "ext.risd");
    REQUIRE(ds.size() == 1);
    CHECK(ds.samples[0].composite()(0, 0) == cplx(1.0, 0.0));
    CHECK(ds.samples[0].composite()(0, 1) == cplx(0.0, 2.0));
}

TEST_CASE("composite matrix stacks vectorized channels")
{
    ScenarioConfig cfg;
    const auto ds = generate(cfg, 4);
    const CMatrix X = ds.composite_matrix(1, 2);
    CHECK(X.rows() == 36);
    CHECK(X.cols() == 2);
    CHECK(X.col(1) == ds.samples[2].composite_vec());
}
