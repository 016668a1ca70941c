// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_BENCH_CONFIG_HPP
#define RISPA_BENCH_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rispa/channel_gen.hpp"
#include "rispa/gmm.hpp"
#include "rispa/learn/trainer.hpp"

namespace rispa::bench {

enum class Strategy { dft_sub, random, dft_search, learned };
enum class EstimatorKind { ls, sample_cov, gmm, cnn };

std::string to_string(Strategy s);
std::string to_string(EstimatorKind e);
Strategy strategy_from_string(const std::string& name);
EstimatorKind estimator_from_string(const std::string& name);

struct SweepPoint {
    double snr_db = 20.0;
    std::size_t allocations = 4;
};

// Either an SNR list at fixed N_v or an N_v list at fixed SNR.
struct Sweep {
    enum class Axis { snr, nv } axis = Axis::snr;
    std::vector<double> snr_db{0.0, 10.0, 20.0};
    std::vector<std::size_t> allocations{4};
    double fixed_snr_db = 20.0;
    std::size_t fixed_allocations = 4;

    std::vector<SweepPoint> points() const;
};

struct SearchSettings {
    EstimatorKind estimator = EstimatorKind::gmm;
    std::size_t samples = 200; // taken from the start of the training partition
    std::uint64_t max_combinations = 100000;
};

struct HyperSettings {
    std::size_t trials = 0; // 0 trains the fixed `train` configuration
    learn::HyperRanges ranges;
};

struct ExperimentConfig {
    std::string preset = "desk";
    ScenarioConfig scenario;
    std::optional<std::filesystem::path> dataset_path;
    std::size_t train_count = 20000;
    std::size_t test_count = 2000;
    // Carved from the end of the training partition for CNN validation.
    std::size_t validation_count = 1000;
    std::vector<Strategy> strategies{Strategy::dft_sub, Strategy::random};
    std::vector<EstimatorKind> estimators{EstimatorKind::ls, EstimatorKind::sample_cov};
    Sweep sweep;
    std::vector<std::uint64_t> seeds{1};
    GmmFitOptions gmm;
    // allocations, snr_db and seed are overridden per sweep point and run seed
    learn::TrainConfig train;
    // When set, CNNs train over this SNR range instead of the sweep point's SNR.
    std::optional<std::pair<double, double>> train_snr_range_db;
    HyperSettings hyper;
    SearchSettings search;
    std::filesystem::path artifacts_dir = "artifacts";
    std::filesystem::path output = "results.csv";
    std::size_t parallel = 1;

    ChannelShape shape() const noexcept { return scenario.shape; }
    void validate() const;
};

// "desk" (M=4, L=8), "m8l16" (M=8, L=16) and "m16l64" (M=16, L=64).
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Reads a JSON config; keys that are absent keep the values of the named preset.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);

// Canonical JSON rendering of every field.
std::string dump_config(const ExperimentConfig& config);

} // namespace rispa::bench

#endif
