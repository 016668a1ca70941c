// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_PHASE_ALLOC_HPP
#define RISPA_PHASE_ALLOC_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rispa/estimators.hpp"
#include "rispa/model.hpp"

namespace rispa {

// Entry (m, n) = exp(j 2 pi m n / N_v), m = 0..L, n = 0..N_v-1.
PhaseMatrix dft_submatrix(std::size_t elements, std::size_t allocations);

// Columns of the (L+1)-point DFT matrix, selected by 1-based index.
PhaseMatrix dft_column_subset(std::size_t elements, std::span<const std::size_t> columns);

// i.i.d. CN(0,1) entries projected onto the unit circle. The first row is
// fixed to 1 (direct path); only rows 1..L are random.
PhaseMatrix random_phases(std::size_t elements, std::size_t allocations, Rng& rng);

// Binomial coefficient; throws ParameterError on 64-bit overflow.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

struct DftSearchOptions {
    std::size_t allocations = 8;
    double noise_variance = 1e-4;
    std::uint64_t seed = 1;
    std::uint64_t max_combinations = 100000;
};

struct DftSearchResult {
    std::size_t elements = 0;
    std::size_t combinations = 0;
    // Best 1-based column set per sample (lexicographically smallest on ties).
    std::vector<std::vector<std::size_t>> per_sample_best;
    // Relative occurrence of each column among the per-sample best sets, sums to 1.
    std::vector<double> histogram;
    std::vector<std::size_t> best_average_set;
    double best_average_nmse = 0.0;
};

// For every channel, tries all C(L+1, N_v) DFT column sets with one noise draw
// per channel shared across sets, and keeps the set with the lowest squared
// error. The noise of channel i is drawn from derive_seed(seed, i).
DftSearchResult exhaustive_dft_search(std::span<const CMatrix> channels, const ChannelEstimator& estimator,
                                      const DftSearchOptions& options);

// CSV with header `column,relative_frequency`.
void write_histogram_csv(const DftSearchResult& result, const std::filesystem::path& path);

} // namespace rispa

#endif
