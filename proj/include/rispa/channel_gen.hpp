// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_CHANNEL_GEN_HPP
#define RISPA_CHANNEL_GEN_HPP

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "rispa/model.hpp"

namespace rispa {

enum class RisOrientation { parallel, downtilt };

// Geometric cluster scenario: BS with a half-wavelength ULA at the origin looking
// along +x, MTs dropped uniformly in its 120 degree sector, and a URA RIS at fixed
// distance whose aperture faces the BS. RIS rows are vertical, columns horizontal.
struct ScenarioConfig {
    ChannelShape shape{4, 8};
    std::size_t ris_rows = 2;
    std::size_t ris_cols = 4;
    RisOrientation orientation = RisOrientation::parallel;
    double downtilt_deg = 0.0;

    std::size_t direct_clusters = 3;
    std::size_t mt_ris_clusters = 3;
    // Rician K-factor of the RIS-BS link; +infinity gives a pure LOS outer product.
    double rician_k = 10.0;
    // Standard deviation of per-cluster angular offsets around the LOS direction.
    double angle_spread_deg = 5.0;

    double bs_ris_distance_m = 500.0;
    double ris_azimuth_deg = 20.0; // RIS direction seen from the BS boresight
    double bs_height_m = 25.0;
    double ris_height_m = 25.0;
    double mt_height_m = 1.5;
    double min_radius_m = 35.0;
    double max_radius_m = 400.0;
    double sector_deg = 120.0;

    std::uint64_t seed = 1;

    void validate() const;
};

struct ChannelDataset {
    ChannelShape shape;
    std::optional<ScenarioConfig> scenario; // absent for imported files
    std::vector<ChannelSample> samples;
    bool normalized = false;

    std::size_t size() const noexcept { return samples.size(); }

    // d x N matrix whose columns are vec(H_n) for n in [first, first + count).
    CMatrix composite_matrix(std::size_t first, std::size_t count) const;

    // (1/N) sum_n ||vec(H_n)||^2
    double second_moment() const;
};

// Half-wavelength ULA response exp(j pi m sin(theta)), m = 0..n-1.
CVector ula_steering(std::size_t n, double theta_rad);

// URA response for rows x cols elements, element index = row * cols + col.
CVector ura_steering(std::size_t rows, std::size_t cols, double azimuth_rad, double elevation_rad);

ChannelDataset generate(const ScenarioConfig& config, std::size_t count);

// Scales all samples by c = sqrt(N M (L+1) / sum ||vec(H_n)||^2).
ChannelDataset normalize(const ChannelDataset& dataset);

// The factor normalize() would apply.
double normalization_factor(const ChannelDataset& dataset);

// Binary "RISD" container, see README for the layout.
void save(const ChannelDataset& dataset, const std::filesystem::path& path);
ChannelDataset load(const std::filesystem::path& path);

inline constexpr std::uint16_t dataset_format_version = 1;

} // namespace rispa

#endif
