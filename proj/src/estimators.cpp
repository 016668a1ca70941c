// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/estimators.hpp"

#include <algorithm>
#include <limits>

#include "rispa/errors.hpp"

namespace rispa {

namespace {

constexpr double singular_rcond = 1e-14;

// G = C A^H (A C A^H + sigma^2 I)^{-1}, solved through a Hermitian factorization.
CMatrix lmmse_gain(const CMatrix& C, const CMatrix& A, double noise_variance)
{
    const CMatrix CAh = C * A.adjoint();
    CMatrix inner = A * CAh;
    inner.diagonal().array() += noise_variance;
    Eigen::LLT<CMatrix> llt(inner);
    if (llt.info() != Eigen::Success || !(llt.rcond() > singular_rcond))
        throw NumericalError("A C A^H + sigma^2 I is singular or indefinite (sigma^2 = " +
                             std::to_string(noise_variance) + ")");
    // G^H = inner^{-1} (C A^H)^H
    return llt.solve(CAh.adjoint()).adjoint();
}

class SampleCovBound final : public BoundEstimator {
public:
    explicit SampleCovBound(CMatrix gain) : gain_(std::move(gain)) {}

    CVector estimate(const CVector& y) const override
    {
        if (y.size() != gain_.cols())
            throw DimensionError("observation has length " + std::to_string(y.size()) + ", expected " +
                                 std::to_string(gain_.cols()));
        return gain_ * y;
    }

private:
    CMatrix gain_;
};

} // namespace

CVector ChannelEstimator::estimate(const CVector& y, const PhaseMatrix& V, double noise_variance) const
{
    const auto nv = static_cast<Eigen::Index>(V.allocations());
    if (y.size() == 0 || y.size() % nv != 0)
        throw DimensionError("observation length " + std::to_string(y.size()) + " is not a multiple of N_v = " +
                             std::to_string(nv));
    return bind(V, noise_variance, static_cast<std::size_t>(y.size() / nv))->estimate(y);
}

CMatrix pseudo_inverse(const CMatrix& m, std::size_t* rank)
{
    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    const double tol = static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon() * smax;
    RVector inv = RVector::Zero(s.size());
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) {
            inv(i) = 1.0 / s(i);
            ++r;
        }
    if (rank)
        *rank = r;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

LsEstimator::Bound::Bound(const PhaseMatrix& V, std::size_t antennas) : antennas_(antennas), rank_(0)
{
    if (antennas < 1)
        throw DimensionError("antenna count must be at least 1");
    pinv_ = pseudo_inverse(V.values(), &rank_);
}

CVector LsEstimator::Bound::estimate(const CVector& y) const
{
    // (V^+ (x) I) y  ==  vec(Y V^+)
    const CMatrix Y = unvectorize(y, antennas_, static_cast<std::size_t>(pinv_.rows()));
    return vectorize(Y * pinv_);
}

std::unique_ptr<BoundEstimator> LsEstimator::bind(const PhaseMatrix& V, double, std::size_t antennas) const
{
    return std::make_unique<Bound>(V, antennas);
}

CMatrix lmmse_sample_cov_fit(const CMatrix& samples)
{
    if (samples.cols() < 1)
        throw ParameterError("sample covariance needs at least one sample");
    CMatrix C = samples * samples.adjoint() / static_cast<double>(samples.cols());
    // exact Hermitian symmetry
    C = (0.5 * (C + C.adjoint())).eval();
    return C;
}

CVector lmmse_sample_cov_estimate(const CVector& y, const PhaseMatrix& V, double noise_variance, const CMatrix& C)
{
    return SampleCovEstimator(C).estimate(y, V, noise_variance);
}

SampleCovEstimator::SampleCovEstimator(CMatrix covariance) : C_(std::move(covariance))
{
    if (C_.rows() != C_.cols() || C_.rows() == 0)
        throw DimensionError("covariance must be square and non-empty");
}

std::unique_ptr<BoundEstimator> SampleCovEstimator::bind(const PhaseMatrix& V, double noise_variance,
                                                         std::size_t antennas) const
{
    if (!(noise_variance >= 0.0))
        throw ParameterError("noise variance must be nonnegative");
    if (static_cast<std::size_t>(C_.rows()) != antennas * V.rows())
        throw DimensionError("covariance is " + std::to_string(C_.rows()) + "-dimensional, expected " +
                             std::to_string(antennas * V.rows()));
    return std::make_unique<SampleCovBound>(lmmse_gain(C_, build_observation_matrix(V, antennas), noise_variance));
}

} // namespace rispa
