// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_GMM_HPP
#define RISPA_GMM_HPP

#include <filesystem>
#include <vector>

#include "rispa/estimators.hpp"

namespace rispa {

// Mixture of K circularly-symmetric complex Gaussians over vec(H).
struct GmmModel {
    RVector weights;              // K, on the simplex
    std::vector<CVector> means;   // K x d
    std::vector<CMatrix> covs;    // K x (d x d), Hermitian positive definite

    std::size_t components() const noexcept { return static_cast<std::size_t>(weights.size()); }
    std::size_t dim() const noexcept { return means.empty() ? 0 : static_cast<std::size_t>(means.front().size()); }

    // Throws DimensionError / ParameterError if shapes or the simplex constraint are violated.
    void validate() const;
};

struct GmmFitOptions {
    std::size_t components = 16;
    std::size_t max_iter = 100;
    double tol = 1e-6;
    // Absolute floor on the covariance eigenvalues.
    double reg_floor = 1e-6;
};

struct GmmFitResult {
    GmmModel model;
    // Regularized log-likelihood after every EM iteration (the quantity EM ascends).
    std::vector<double> objective;
    // Plain data log-likelihood after every iteration.
    std::vector<double> log_likelihood;
    double floor = 0.0; // absolute covariance floor used
    bool converged = false;
};

// EM for complex Gaussian mixtures on the columns of `samples` (d x N).
//
// Means are seeded k-means++ style, covariances start at the global sample
// covariance and weights are uniform. The covariance update is the maximizer
// of the log-likelihood penalised by -lambda sum_k tr(C_k^{-1}), i.e.
//     C_k = (S_k + lambda I) / N_k,  lambda = floor * N,
// which keeps min eig(C_k) >= floor and makes the penalised objective exactly
// nondecreasing. With K = 1 this is the sample covariance plus floor * I.
GmmFitResult gmm_fit(const CMatrix& samples, const GmmFitOptions& options, Rng& rng);

// log N_C(x; mu, C) for every column of x.
RVector complex_gaussian_logpdf(const CMatrix& x, const CVector& mean, const CMatrix& cov);

// p(k | y) with C_{y,k} = A C_k A^H + sigma^2 I.
RVector gmm_responsibilities(const CVector& y, const PhaseMatrix& V, double noise_variance, const GmmModel& model);

// sum_k p(k|y) (mu_k + C_k A^H C_{y,k}^{-1} (y - A mu_k))
CVector gmm_estimate(const CVector& y, const PhaseMatrix& V, double noise_variance, const GmmModel& model);

class GmmEstimator final : public ChannelEstimator {
public:
    class Bound;

    explicit GmmEstimator(GmmModel model);

    std::string name() const override { return "gmm"; }
    std::unique_ptr<BoundEstimator> bind(const PhaseMatrix& V, double noise_variance,
                                         std::size_t antennas) const override;
    // Observation-matrix form, for callers that already hold A.
    std::unique_ptr<Bound> bind_matrix(const CMatrix& A, double noise_variance) const;

    const GmmModel& model() const noexcept { return model_; }

private:
    GmmModel model_;
};

class GmmEstimator::Bound final : public BoundEstimator {
public:
    Bound(const GmmModel& model, const CMatrix& A, double noise_variance);

    CVector estimate(const CVector& y) const override;
    RVector responsibilities(const CVector& y) const;

private:
    struct Component {
        double log_weight;
        double log_det;        // log det C_{y,k}
        CVector mean;          // mu_k
        CVector observed_mean; // A mu_k
        CMatrix whitener;      // L_k^{-1}, C_{y,k} = L_k L_k^H
        CMatrix gain;          // C_k A^H C_{y,k}^{-1}
    };

    RVector log_posterior(const CVector& y) const;

    std::vector<Component> comps_;
    Eigen::Index obs_dim_;
};

inline constexpr std::uint16_t gmm_format_version = 1;

void save_gmm(const GmmModel& model, const std::filesystem::path& path);
GmmModel load_gmm(const std::filesystem::path& path);

} // namespace rispa

#endif
