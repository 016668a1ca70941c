// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/phase_alloc.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

#include "rispa/errors.hpp"

namespace rispa {

namespace {

cplx unit(std::size_t numerator, std::size_t period)
{
    // reduce first so large products keep full precision
    const std::size_t r = numerator % period;
    return std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(period));
}

// Advances `idx` (sorted 0-based k-subset of 0..n-1) to the next subset in
// lexicographic order. Returns false after the last one.
bool next_combination(std::vector<std::size_t>& idx, std::size_t n)
{
    const std::size_t k = idx.size();
    for (std::size_t i = k; i-- > 0;) {
        if (idx[i] < n - k + i) {
            ++idx[i];
            for (std::size_t j = i + 1; j < k; ++j)
                idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

} // namespace

PhaseMatrix dft_submatrix(std::size_t elements, std::size_t allocations)
{
    if (allocations < 1)
        throw ParameterError("number of phase allocations must be at least 1");
    CMatrix V(static_cast<Eigen::Index>(elements + 1), static_cast<Eigen::Index>(allocations));
    for (std::size_t n = 0; n < allocations; ++n)
        for (std::size_t m = 0; m <= elements; ++m)
            V(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) = unit(m * n, allocations);
    return PhaseMatrix(std::move(V));
}

PhaseMatrix dft_column_subset(std::size_t elements, std::span<const std::size_t> columns)
{
    const std::size_t period = elements + 1;
    if (columns.empty())
        throw ParameterError("DFT column set is empty");
    std::vector<bool> seen(period, false);
    CMatrix V(static_cast<Eigen::Index>(period), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t n = 0; n < columns.size(); ++n) {
        const std::size_t c = columns[n];
        if (c < 1 || c > period)
            throw ParameterError("DFT column " + std::to_string(c) + " outside 1.." + std::to_string(period));
        if (seen[c - 1])
            throw ParameterError("DFT column " + std::to_string(c) + " selected twice");
        seen[c - 1] = true;
        for (std::size_t m = 0; m < period; ++m)
            V(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) = unit(m * (c - 1), period);
    }
    return PhaseMatrix(std::move(V));
}

PhaseMatrix random_phases(std::size_t elements, std::size_t allocations, Rng& rng)
{
    if (allocations < 1)
        throw ParameterError("number of phase allocations must be at least 1");
    CMatrix V(static_cast<Eigen::Index>(elements + 1), static_cast<Eigen::Index>(allocations));
    for (Eigen::Index n = 0; n < V.cols(); ++n) {
        V(0, n) = 1.0;
        for (Eigen::Index m = 1; m < V.rows(); ++m) {
            cplx g = complex_normal(rng);
            while (std::abs(g) == 0.0)
                g = complex_normal(rng);
            // polar() of the argument keeps |v| = 1 to the last bit
            V(m, n) = std::polar(1.0, std::arg(g));
        }
    }
    return PhaseMatrix(std::move(V));
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k)
{
    if (k > n)
        return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        const std::uint64_t factor = n - k + i;
        if (result > std::numeric_limits<std::uint64_t>::max() / factor)
            throw ParameterError("binomial coefficient C(" + std::to_string(n) + "," + std::to_string(k) +
                                 ") overflows");
        // result * factor is divisible by i at every step
        result = result * factor / i;
    }
    return result;
}

DftSearchResult exhaustive_dft_search(std::span<const CMatrix> channels, const ChannelEstimator& estimator,
                                      const DftSearchOptions& options)
{
    if (channels.empty())
        throw ParameterError("exhaustive search needs at least one channel");
    const auto M = static_cast<std::size_t>(channels.front().rows());
    const auto columns = static_cast<std::size_t>(channels.front().cols());
    if (columns < 2)
        throw DimensionError("channels must have L+1 >= 2 columns");
    const std::size_t L = columns - 1;
    const std::size_t Nv = options.allocations;
    if (Nv < 1 || Nv > columns)
        throw ParameterError("N_v = " + std::to_string(Nv) + " must lie in 1.." + std::to_string(columns));

    const std::uint64_t count = binomial(columns, Nv);
    if (count > options.max_combinations)
        throw ParameterError("exhaustive search over C(" + std::to_string(columns) + "," + std::to_string(Nv) +
                             ") = " + std::to_string(count) + " combinations exceeds the cap of " +
                             std::to_string(options.max_combinations));

    const std::size_t S = channels.size();
    std::vector<CMatrix> noise(S);
    for (std::size_t i = 0; i < S; ++i) {
        if (static_cast<std::size_t>(channels[i].rows()) != M || static_cast<std::size_t>(channels[i].cols()) != columns)
            throw DimensionError("channel " + std::to_string(i) + " has inconsistent shape");
        Rng rng(derive_seed(options.seed, i));
        noise[i] = draw_noise(M, Nv, options.noise_variance, rng);
    }

    std::vector<double> best_err(S, std::numeric_limits<double>::infinity());
    std::vector<std::vector<std::size_t>> best_set(S);
    double best_avg = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_avg_set;
    const double norm = static_cast<double>(M * columns);

    std::vector<std::size_t> idx(Nv);
    for (std::size_t i = 0; i < Nv; ++i)
        idx[i] = i;
    do {
        std::vector<std::size_t> set(Nv);
        for (std::size_t i = 0; i < Nv; ++i)
            set[i] = idx[i] + 1;
        const PhaseMatrix V = dft_column_subset(L, set);
        const auto bound = estimator.bind(V, options.noise_variance, M);
        double total = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const CMatrix Y = channels[s] * V.values() + noise[s];
            const CVector h_hat = bound->estimate(vectorize(Y));
            const double err = (h_hat - Eigen::Map<const CVector>(channels[s].data(), channels[s].size())).squaredNorm();
            total += err;
            if (err < best_err[s]) {
                best_err[s] = err;
                best_set[s] = set;
            }
        }
        const double avg = total / static_cast<double>(S) / norm;
        if (avg < best_avg) {
            best_avg = avg;
            best_avg_set = set;
        }
    } while (next_combination(idx, columns));

    DftSearchResult result;
    result.elements = L;
    result.combinations = static_cast<std::size_t>(count);
    result.per_sample_best = std::move(best_set);
    result.histogram.assign(columns, 0.0);
    for (const auto& set : result.per_sample_best)
        for (const std::size_t c : set)
            result.histogram[c - 1] += 1.0;
    const double total = static_cast<double>(S * Nv);
    for (auto& h : result.histogram)
        h /= total;
    result.best_average_set = std::move(best_avg_set);
    result.best_average_nmse = best_avg;
    return result;
}

void write_histogram_csv(const DftSearchResult& result, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    out << "column,relative_frequency\n";
    char buf[64];
    for (std::size_t c = 0; c < result.histogram.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", result.histogram[c]);
        out << (c + 1) << ',' << buf << '\n';
    }
    if (!out)
        throw IoError("write to '" + path.string() + "' failed");
}

} // namespace rispa
