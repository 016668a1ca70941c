// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/channel_gen.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rispa/binary_io.hpp"
#include "rispa/errors.hpp"

namespace rispa {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

struct Angles {
    double azimuth;
    double elevation;
};

// Direction of `target` in the RIS array frame. The RIS boresight points back
// along -x towards the BS side; its horizontal axis is -y.
Angles ris_frame(const ScenarioConfig& cfg, double dx, double dy, double dz)
{
    const double along = -dx;
    const double across = -dy;
    const double horizontal = std::hypot(along, across);
    Angles a{std::atan2(across, along), std::atan2(dz, horizontal)};
    if (cfg.orientation == RisOrientation::downtilt)
        a.elevation += cfg.downtilt_deg * deg;
    return a;
}

CVector cluster_sum_ula(std::size_t n, double theta, std::size_t clusters, double spread, Rng& rng)
{
    std::normal_distribution<double> offset(0.0, 1.0);
    CVector h = CVector::Zero(static_cast<Eigen::Index>(n));
    const double power = 1.0 / static_cast<double>(clusters);
    for (std::size_t c = 0; c < clusters; ++c) {
        const cplx gain = complex_normal(rng, power);
        const double angle = theta + spread * offset(rng);
        h += gain * ula_steering(n, angle);
    }
    return h;
}

CVector cluster_sum_ura(const ScenarioConfig& cfg, Angles dir, double spread, Rng& rng)
{
    std::normal_distribution<double> offset(0.0, 1.0);
    CVector h = CVector::Zero(static_cast<Eigen::Index>(cfg.shape.elements));
    const double power = 1.0 / static_cast<double>(cfg.mt_ris_clusters);
    for (std::size_t c = 0; c < cfg.mt_ris_clusters; ++c) {
        const cplx gain = complex_normal(rng, power);
        const double az = dir.azimuth + spread * offset(rng);
        const double el = dir.elevation + spread * offset(rng);
        h += gain * ura_steering(cfg.ris_rows, cfg.ris_cols, az, el);
    }
    return h;
}

ChannelSample draw_sample(const ScenarioConfig& cfg, Rng& rng)
{
    const std::size_t M = cfg.shape.antennas;
    const double spread = cfg.angle_spread_deg * deg;

    // MT drop, uniform over the sector area
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double r2min = cfg.min_radius_m * cfg.min_radius_m;
    const double r2max = cfg.max_radius_m * cfg.max_radius_m;
    const double radius = std::sqrt(r2min + (r2max - r2min) * u01(rng));
    const double phi = (u01(rng) - 0.5) * cfg.sector_deg * deg;
    const double mt_x = radius * std::cos(phi);
    const double mt_y = radius * std::sin(phi);

    CVector h0 = cluster_sum_ula(M, phi, cfg.direct_clusters, spread, rng);

    const double ris_x = cfg.bs_ris_distance_m * std::cos(cfg.ris_azimuth_deg * deg);
    const double ris_y = cfg.bs_ris_distance_m * std::sin(cfg.ris_azimuth_deg * deg);
    const Angles to_mt = ris_frame(cfg, mt_x - ris_x, mt_y - ris_y, cfg.mt_height_m - cfg.ris_height_m);
    CVector h1 = cluster_sum_ura(cfg, to_mt, spread, rng);

    const Angles to_bs = ris_frame(cfg, -ris_x, -ris_y, cfg.bs_height_m - cfg.ris_height_m);
    const CVector bs_side = ula_steering(M, cfg.ris_azimuth_deg * deg);
    const CVector ris_side = ura_steering(cfg.ris_rows, cfg.ris_cols, to_bs.azimuth, to_bs.elevation);
    CMatrix H2 = bs_side * ris_side.transpose();
    if (std::isfinite(cfg.rician_k)) {
        H2 *= std::sqrt(cfg.rician_k / (cfg.rician_k + 1.0));
        const double scatter = std::sqrt(1.0 / (cfg.rician_k + 1.0));
        for (Eigen::Index l = 0; l < H2.cols(); ++l)
            for (Eigen::Index m = 0; m < H2.rows(); ++m)
                H2(m, l) += scatter * complex_normal(rng);
    }
    return ChannelSample(std::move(h0), std::move(h1), std::move(H2));
}

} // namespace

void ScenarioConfig::validate() const
{
    shape.validate();
    if (ris_rows * ris_cols != shape.elements)
        throw ParameterError("RIS layout " + std::to_string(ris_rows) + "x" + std::to_string(ris_cols) +
                             " does not match " + std::to_string(shape.elements) + " elements");
    if (direct_clusters < 1 || mt_ris_clusters < 1)
        throw ParameterError("cluster counts must be at least 1");
    if (!(rician_k >= 0.0))
        throw ParameterError("Rician K-factor must be nonnegative");
    if (!(angle_spread_deg >= 0.0) || !std::isfinite(angle_spread_deg))
        throw ParameterError("angle spread must be a finite nonnegative number");
    if (!(min_radius_m > 0.0) || !(max_radius_m >= min_radius_m))
        throw ParameterError("cell radii must satisfy 0 < min <= max");
    if (!(sector_deg > 0.0 && sector_deg <= 360.0))
        throw ParameterError("sector width must lie in (0, 360] degrees");
    if (!(bs_ris_distance_m > 0.0))
        throw ParameterError("BS-RIS distance must be positive");
}

CMatrix ChannelDataset::composite_matrix(std::size_t first, std::size_t count) const
{
    if (first + count > samples.size())
        throw ParameterError("sample range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                             ") exceeds dataset of " + std::to_string(samples.size()));
    const auto d = static_cast<Eigen::Index>(shape.composite_dim());
    CMatrix X(d, static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        const CMatrix& H = samples[first + i].composite();
        X.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const CVector>(H.data(), d);
    }
    return X;
}

double ChannelDataset::second_moment() const
{
    if (samples.empty())
        throw ParameterError("empty dataset");
    double total = 0.0;
    for (const auto& s : samples)
        total += s.composite().squaredNorm();
    return total / static_cast<double>(samples.size());
}

CVector ula_steering(std::size_t n, double theta_rad)
{
    CVector a(static_cast<Eigen::Index>(n));
    const double k = std::numbers::pi * std::sin(theta_rad);
    for (std::size_t m = 0; m < n; ++m)
        a(static_cast<Eigen::Index>(m)) = std::polar(1.0, k * static_cast<double>(m));
    return a;
}

CVector ura_steering(std::size_t rows, std::size_t cols, double azimuth_rad, double elevation_rad)
{
    const CVector vertical = ula_steering(rows, elevation_rad);
    const double kh = std::numbers::pi * std::cos(elevation_rad) * std::sin(azimuth_rad);
    CVector a(static_cast<Eigen::Index>(rows * cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            a(static_cast<Eigen::Index>(r * cols + c)) =
                vertical(static_cast<Eigen::Index>(r)) * std::polar(1.0, kh * static_cast<double>(c));
    return a;
}

ChannelDataset generate(const ScenarioConfig& config, std::size_t count)
{
    config.validate();
    if (count < 1)
        throw ParameterError("dataset size must be at least 1");
    ChannelDataset out;
    out.shape = config.shape;
    out.scenario = config;
    out.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(config.seed, i));
        out.samples.push_back(draw_sample(config, rng));
    }
    return out;
}

double normalization_factor(const ChannelDataset& dataset)
{
    const double moment = dataset.second_moment();
    if (!(moment > 0.0))
        throw DegenerateDataError("cannot normalize a dataset whose channels are all zero");
    return std::sqrt(static_cast<double>(dataset.shape.composite_dim()) / moment);
}

ChannelDataset normalize(const ChannelDataset& dataset)
{
    const double c = normalization_factor(dataset);
    ChannelDataset out;
    out.shape = dataset.shape;
    out.scenario = dataset.scenario;
    out.normalized = true;
    out.samples.reserve(dataset.size());
    for (const auto& s : dataset.samples)
        out.samples.push_back(s.scaled(c));
    return out;
}

void save(const ChannelDataset& dataset, const std::filesystem::path& path)
{
    binio::Writer w(path);
    w.magic("RISD");
    w.u16(dataset_format_version);
    w.u32(static_cast<std::uint32_t>(dataset.shape.antennas));
    w.u32(static_cast<std::uint32_t>(dataset.shape.elements));
    w.u64(dataset.samples.size());
    w.u8(dataset.normalized ? 1 : 0);
    for (const auto& s : dataset.samples) {
        for (Eigen::Index i = 0; i < s.direct().size(); ++i)
            w.c128(s.direct()(i));
        for (Eigen::Index i = 0; i < s.mt_ris().size(); ++i)
            w.c128(s.mt_ris()(i));
        const CMatrix& H2 = s.ris_bs();
        for (Eigen::Index i = 0; i < H2.size(); ++i)
            w.c128(H2.data()[i]);
    }
    w.finish();
}

ChannelDataset load(const std::filesystem::path& path)
{
    binio::Reader r(path);
    r.expect_magic("RISD");
    const auto version = r.u16();
    if (version != dataset_format_version)
        throw FormatError(FormatError::Kind::bad_version,
                          "'" + path.string() + "' has unsupported dataset version " + std::to_string(version));
    ChannelDataset out;
    out.shape.antennas = r.u32();
    out.shape.elements = r.u32();
    const std::uint64_t count = r.u64();
    const std::uint8_t flags = r.u8();
    if (out.shape.antennas < 1 || out.shape.elements < 1)
        throw FormatError(FormatError::Kind::bad_header, "'" + path.string() + "' declares empty dimensions");
    if (flags & ~std::uint8_t{1})
        throw FormatError(FormatError::Kind::bad_header, "'" + path.string() + "' sets unknown flag bits");
    out.normalized = (flags & 1) != 0;

    const std::uint64_t M = out.shape.antennas;
    const std::uint64_t L = out.shape.elements;
    const std::uint64_t per_sample = (M + L + M * L) * 16;
    const std::uint64_t available = r.remaining();
    if (available / per_sample < count)
        throw FormatError(FormatError::Kind::truncated, "'" + path.string() + "' declares " + std::to_string(count) +
                                                            " samples but holds payload for " +
                                                            std::to_string(available / per_sample));
    if (available != count * per_sample)
        throw FormatError(FormatError::Kind::inconsistent,
                          "'" + path.string() + "' has " + std::to_string(available - count * per_sample) +
                              " trailing bytes; header dimensions do not match the payload");

    out.samples.reserve(count);
    for (std::uint64_t n = 0; n < count; ++n) {
        CVector h0(static_cast<Eigen::Index>(M));
        for (Eigen::Index i = 0; i < h0.size(); ++i)
            h0(i) = r.c128();
        CVector h1(static_cast<Eigen::Index>(L));
        for (Eigen::Index i = 0; i < h1.size(); ++i)
            h1(i) = r.c128();
        CMatrix H2(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(L));
        for (Eigen::Index i = 0; i < H2.size(); ++i)
            H2.data()[i] = r.c128();
        out.samples.emplace_back(std::move(h0), std::move(h1), std::move(H2));
    }
    return out;
}

} // namespace rispa
