// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_ESTIMATORS_HPP
#define RISPA_ESTIMATORS_HPP

#include <memory>
#include <string>

#include "rispa/model.hpp"

namespace rispa {

// An estimator specialised to one phase matrix and noise level. Anything that
// only depends on (V, sigma^2) is computed once when binding.
class BoundEstimator {
public:
    virtual ~BoundEstimator() = default;

    // y has length M N_v; the result is vec(Hhat) of length M (L+1).
    virtual CVector estimate(const CVector& y) const = 0;
};

class ChannelEstimator {
public:
    virtual ~ChannelEstimator() = default;

    virtual std::string name() const = 0;
    virtual std::unique_ptr<BoundEstimator> bind(const PhaseMatrix& V, double noise_variance,
                                                 std::size_t antennas) const = 0;

    // One-shot estimate; the antenna count is inferred from len(y) / N_v.
    CVector estimate(const CVector& y, const PhaseMatrix& V, double noise_variance) const;
};

// Least squares, Hhat = Y V^+.
class LsEstimator final : public ChannelEstimator {
public:
    class Bound;

    std::string name() const override { return "ls"; }
    std::unique_ptr<BoundEstimator> bind(const PhaseMatrix& V, double noise_variance,
                                         std::size_t antennas) const override;
};

class LsEstimator::Bound final : public BoundEstimator {
public:
    Bound(const PhaseMatrix& V, std::size_t antennas);

    CVector estimate(const CVector& y) const override;

    std::size_t rank() const noexcept { return rank_; }
    // rank(V) < L+1, i.e. the LS problem is under-determined
    bool rank_deficient() const noexcept { return rank_ < static_cast<std::size_t>(pinv_.cols()); }

private:
    CMatrix pinv_; // N_v x (L+1)
    std::size_t antennas_;
    std::size_t rank_;
};

// Moore-Penrose pseudoinverse via SVD with tolerance max(rows, cols) * eps * s_max.
CMatrix pseudo_inverse(const CMatrix& m, std::size_t* rank = nullptr);

// C = (1/N) sum h_n h_n^H over the columns of `samples` (no mean removal).
CMatrix lmmse_sample_cov_fit(const CMatrix& samples);

// h = C A^H (A C A^H + sigma^2 I)^{-1} y
CVector lmmse_sample_cov_estimate(const CVector& y, const PhaseMatrix& V, double noise_variance, const CMatrix& C);

class SampleCovEstimator final : public ChannelEstimator {
public:
    explicit SampleCovEstimator(CMatrix covariance);

    std::string name() const override { return "sample_cov"; }
    std::unique_ptr<BoundEstimator> bind(const PhaseMatrix& V, double noise_variance,
                                         std::size_t antennas) const override;

    const CMatrix& covariance() const noexcept { return C_; }

private:
    CMatrix C_;
};

} // namespace rispa

#endif
