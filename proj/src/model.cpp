// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/model.hpp"

#include <cmath>
#include <string>

#include "rispa/errors.hpp"

namespace rispa {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

cplx complex_normal(Rng& rng, double variance)
{
    std::normal_distribution<double> g(0.0, 1.0);
    const double scale = std::sqrt(variance / 2.0);
    const double re = g(rng);
    const double im = g(rng);
    return {re * scale, im * scale};
}

void ChannelShape::validate() const
{
    if (antennas < 1)
        throw ParameterError("antenna count must be at least 1");
    if (elements < 1)
        throw ParameterError("RIS element count must be at least 1");
}

void SystemDims::validate() const
{
    shape.validate();
    if (allocations < 1)
        throw ParameterError("number of phase allocations must be at least 1");
}

CMatrix assemble_composite(const CVector& h0, const CVector& h1, const CMatrix& H2)
{
    const auto M = h0.size();
    const auto L = h1.size();
    if (H2.rows() != M || H2.cols() != L)
        throw DimensionError("RIS-BS channel is " + std::to_string(H2.rows()) + "x" + std::to_string(H2.cols()) +
                             ", expected " + std::to_string(M) + "x" + std::to_string(L));
    CMatrix H(M, L + 1);
    H.col(0) = h0;
    for (Eigen::Index l = 0; l < L; ++l)
        H.col(l + 1) = h1(l) * H2.col(l);
    return H;
}

ChannelSample::ChannelSample(CVector h0, CVector h1, CMatrix H2)
    : h0_(std::move(h0)), h1_(std::move(h1)), H2_(std::move(H2))
{
    H_ = assemble_composite(h0_, h1_, H2_);
}

CVector ChannelSample::composite_vec() const
{
    return vectorize(H_);
}

ChannelSample ChannelSample::scaled(double factor) const
{
    return ChannelSample(h0_ * factor, h1_ * factor, H2_);
}

PhaseMatrix::PhaseMatrix(CMatrix values) : V_(std::move(values))
{
    if (V_.rows() < 1 || V_.cols() < 1)
        throw DimensionError("phase matrix must be non-empty");
    for (Eigen::Index n = 0; n < V_.cols(); ++n) {
        if (std::abs(V_(0, n) - cplx(1.0, 0.0)) > modulus_tolerance)
            throw ParameterError("phase matrix first row must be 1 (column " + std::to_string(n) + ")");
        for (Eigen::Index m = 0; m < V_.rows(); ++m)
            if (std::abs(std::abs(V_(m, n)) - 1.0) > modulus_tolerance)
                throw ParameterError("phase matrix entry (" + std::to_string(m) + "," + std::to_string(n) +
                                     ") is not unit modulus");
    }
}

CVector Observation::vec() const
{
    return vectorize(Y);
}

CVector vectorize(const CMatrix& m)
{
    return Eigen::Map<const CVector>(m.data(), m.size());
}

CMatrix unvectorize(const CVector& v, std::size_t rows, std::size_t cols)
{
    if (static_cast<std::size_t>(v.size()) != rows * cols)
        throw DimensionError("cannot reshape vector of length " + std::to_string(v.size()) + " to " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    return Eigen::Map<const CMatrix>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

CMatrix draw_noise(std::size_t rows, std::size_t cols, double noise_variance, Rng& rng)
{
    if (!(noise_variance >= 0.0))
        throw ParameterError("noise variance must be nonnegative");
    CMatrix N(rows, cols);
    // column-major fill order is part of the reproducibility contract
    for (Eigen::Index c = 0; c < N.cols(); ++c)
        for (Eigen::Index r = 0; r < N.rows(); ++r)
            N(r, c) = complex_normal(rng, noise_variance);
    return N;
}

Observation observe(const CMatrix& H, const PhaseMatrix& V, double noise_variance, Rng& rng)
{
    if (!(noise_variance >= 0.0))
        throw ParameterError("noise variance must be nonnegative");
    if (static_cast<std::size_t>(H.cols()) != V.rows())
        throw DimensionError("channel has " + std::to_string(H.cols()) + " columns but phase matrix has " +
                             std::to_string(V.rows()) + " rows");
    Observation obs;
    obs.noise_variance = noise_variance;
    obs.Y = H * V.values();
    if (noise_variance > 0.0)
        obs.Y += draw_noise(static_cast<std::size_t>(H.rows()), V.allocations(), noise_variance, rng);
    return obs;
}

CMatrix build_observation_matrix(const PhaseMatrix& V, std::size_t antennas)
{
    if (antennas < 1)
        throw DimensionError("antenna count must be at least 1");
    const auto& v = V.values();
    const auto M = static_cast<Eigen::Index>(antennas);
    CMatrix A = CMatrix::Zero(v.cols() * M, v.rows() * M);
    // block (n, c) of V^T (x) I is V(c, n) * I
    for (Eigen::Index n = 0; n < v.cols(); ++n)
        for (Eigen::Index c = 0; c < v.rows(); ++c)
            for (Eigen::Index m = 0; m < M; ++m)
                A(n * M + m, c * M + m) = v(c, n);
    return A;
}

double snr_to_noise_variance(double snr_db) noexcept
{
    return std::pow(10.0, -snr_db / 10.0);
}

double nmse(std::span<const CMatrix> truth, std::span<const CMatrix> estimate)
{
    if (truth.empty())
        throw ParameterError("nmse needs a nonempty batch");
    if (truth.size() != estimate.size())
        throw DimensionError("nmse batch sizes differ");
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i].rows() != estimate[i].rows() || truth[i].cols() != estimate[i].cols())
            throw DimensionError("nmse sample " + std::to_string(i) + " has mismatched shape");
        total += (truth[i] - estimate[i]).squaredNorm();
    }
    const double norm = static_cast<double>(truth.front().size());
    return total / static_cast<double>(truth.size()) / norm;
}

} // namespace rispa
