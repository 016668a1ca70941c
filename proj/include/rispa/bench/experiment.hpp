// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_BENCH_EXPERIMENT_HPP
#define RISPA_BENCH_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rispa/bench/config.hpp"
#include "rispa/phase_alloc.hpp"

namespace rispa::bench {

struct ResultRecord {
    std::string strategy;
    std::string estimator;
    double snr_db = 0.0;
    std::size_t n_v = 0;
    double nmse = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    bool underdetermined = false; // LS with rank(V) < L+1; not part of the CSV
};

using Logger = std::function<void(const std::string&)>;

// Dataset for an experiment, normalized with the training partition's second
// moment and split by index: [0, train) for fitting, [train, train + test) for
// evaluation. The last `validation_count` training samples validate CNNs.
class Workspace {
public:
    explicit Workspace(ExperimentConfig config);

    const ExperimentConfig& config() const noexcept { return config_; }
    std::span<const CMatrix> train() const;
    std::span<const CMatrix> cnn_train() const;
    std::span<const CMatrix> validation() const;
    std::span<const CMatrix> test() const;
    CMatrix train_matrix() const; // d x train_count

    // FNV-1a fingerprint of the normalized channels and the partition sizes.
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }

    std::filesystem::path gmm_path(std::uint64_t seed) const;
    std::filesystem::path cnn_path(std::uint64_t seed, const SweepPoint& point) const;
    std::filesystem::path search_path(std::uint64_t seed, const SweepPoint& point) const;

private:
    ExperimentConfig config_;
    std::vector<CMatrix> channels_;
    std::uint64_t fingerprint_ = 0;
};

// Raw (unnormalized) channels for the config: loaded from dataset_path or generated.
ChannelDataset make_dataset(const ExperimentConfig& config);

// The artifact producers behind the CLI subcommands. Each returns the written paths.
std::vector<std::filesystem::path> fit_gmm_artifacts(const Workspace& ws, const Logger& log = {});
std::vector<std::filesystem::path> train_cnn_artifacts(const Workspace& ws, const Logger& log = {});
std::vector<std::filesystem::path> search_dft_artifacts(const Workspace& ws, const Logger& log = {});

// Phase matrix of `strategy` at one sweep point; throws MissingArtifactError for
// dft_search / learned when the artifact has not been produced.
PhaseMatrix phase_matrix_for(const Workspace& ws, Strategy strategy, std::uint64_t seed, const SweepPoint& point);

// Every (seed, strategy, estimator, sweep point) NMSE on the test partition.
// Records are ordered by (seed, strategy, estimator, sweep value) as listed in the config.
std::vector<ResultRecord> run_experiment(const Workspace& ws, const Logger& log = {});

// Loads or generates the dataset, evaluates and writes config.output.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& config, const Logger& log = {});

// Exhaustive DFT search at the first sweep point with the first seed; writes the
// `column,relative_frequency` CSV to `path` and the best average set next to it.
DftSearchResult run_dft_histogram(const Workspace& ws, const std::filesystem::path& path, const Logger& log = {});

void write_results_csv(std::span<const ResultRecord> records, const std::filesystem::path& path);

} // namespace rispa::bench

#endif
