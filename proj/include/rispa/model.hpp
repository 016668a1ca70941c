// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_MODEL_HPP
#define RISPA_MODEL_HPP

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace rispa {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// All stochastic code draws from this engine. Per-sample streams are obtained
// with derive_seed so that results do not depend on evaluation order.
using Rng = std::mt19937_64;

// splitmix64 mix of (seed, stream)
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// Standard circularly-symmetric complex normal scaled to variance `variance`.
cplx complex_normal(Rng& rng, double variance = 1.0);

// Array sizes of a single-antenna MT, M-antenna BS, L-element RIS link.
struct ChannelShape {
    std::size_t antennas = 0; // M
    std::size_t elements = 0; // L

    std::size_t columns() const noexcept { return elements + 1; }
    std::size_t composite_dim() const noexcept { return antennas * (elements + 1); }
    void validate() const;

    bool operator==(const ChannelShape&) const = default;
};

struct SystemDims {
    ChannelShape shape;
    std::size_t allocations = 0; // N_v

    std::size_t antennas() const noexcept { return shape.antennas; }
    std::size_t elements() const noexcept { return shape.elements; }
    std::size_t observation_dim() const noexcept { return shape.antennas * allocations; }
    void validate() const;
};

// H = [h0, h1^T (Khatri-Rao) H2]
CMatrix assemble_composite(const CVector& h0, const CVector& h1, const CMatrix& H2);

// One realization of the direct, MT-RIS and RIS-BS channels plus the cached composite.
class ChannelSample {
public:
    ChannelSample() = default;
    ChannelSample(CVector h0, CVector h1, CMatrix H2);

    const CVector& direct() const noexcept { return h0_; }
    const CVector& mt_ris() const noexcept { return h1_; }
    const CMatrix& ris_bs() const noexcept { return H2_; }
    const CMatrix& composite() const noexcept { return H_; }
    CVector composite_vec() const;

    ChannelShape shape() const noexcept { return {static_cast<std::size_t>(h0_.size()), static_cast<std::size_t>(h1_.size())}; }

    // Multiplies h0 and h1 by `factor`; the composite scales by the same factor.
    ChannelSample scaled(double factor) const;

private:
    CVector h0_;
    CVector h1_;
    CMatrix H2_;
    CMatrix H_;
};

// (L+1) x N_v matrix of unit-modulus RIS coefficients whose first row is 1.
class PhaseMatrix {
public:
    static constexpr double modulus_tolerance = 1e-12;

    PhaseMatrix() = default;
    explicit PhaseMatrix(CMatrix values);

    const CMatrix& values() const noexcept { return V_; }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(V_.rows()); }
    std::size_t allocations() const noexcept { return static_cast<std::size_t>(V_.cols()); }
    std::size_t elements() const noexcept { return rows() - 1; }

    bool operator==(const PhaseMatrix& other) const { return V_ == other.V_; }

private:
    CMatrix V_;
};

struct Observation {
    CMatrix Y;                 // M x N_v
    double noise_variance = 0; // sigma^2

    // column-major vec(Y)
    CVector vec() const;
};

// Column-major vectorization and its inverse.
CVector vectorize(const CMatrix& m);
CMatrix unvectorize(const CVector& v, std::size_t rows, std::size_t cols);

// M x N_v i.i.d. CN(0, sigma^2) entries.
CMatrix draw_noise(std::size_t rows, std::size_t cols, double noise_variance, Rng& rng);

// Y = H V + N
Observation observe(const CMatrix& H, const PhaseMatrix& V, double noise_variance, Rng& rng);

// A = V^T (Kronecker) I_M, so that A vec(H) = vec(H V).
CMatrix build_observation_matrix(const PhaseMatrix& V, std::size_t antennas);

double snr_to_noise_variance(double snr_db) noexcept;

// mean_n ||H_n - Hhat_n||_F^2 / (M (L+1))
double nmse(std::span<const CMatrix> truth, std::span<const CMatrix> estimate);

} // namespace rispa

#endif
