// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "rispa/binary_io.hpp"
#include "rispa/errors.hpp"

namespace rispa {

namespace {

const double log_pi = std::log(std::numbers::pi);

double log_det_from_llt(const Eigen::LLT<CMatrix>& llt)
{
    return 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
}

// log sum_k exp(v_k), tolerant of -inf entries
double log_sum_exp(const Eigen::Ref<const RVector>& v)
{
    const double peak = v.maxCoeff();
    if (!std::isfinite(peak))
        return peak;
    return peak + std::log((v.array() - peak).exp().sum());
}

struct Factored {
    Eigen::LLT<CMatrix> llt;
    double log_det = 0.0;
};

Factored factor(const CMatrix& C, const std::string& what)
{
    Factored f;
    f.llt.compute(C);
    if (f.llt.info() != Eigen::Success)
        throw NumericalError("Cholesky factorization of " + what + " failed");
    f.log_det = log_det_from_llt(f.llt);
    return f;
}

// log N_C for every column, given a factorization of the covariance
RVector logpdf_columns(const CMatrix& x, const CVector& mean, const Factored& f)
{
    const auto d = static_cast<double>(x.rows());
    CMatrix centered = x.colwise() - mean;
    f.llt.matrixL().solveInPlace(centered);
    RVector out = centered.colwise().squaredNorm().transpose();
    out = (-out.array() - d * log_pi - f.log_det).matrix();
    return out;
}

CMatrix hermitian_part(const CMatrix& m)
{
    return 0.5 * (m + m.adjoint());
}

// k-means++ seeding of the component means
std::vector<CVector> seed_means(const CMatrix& X, std::size_t K, Rng& rng)
{
    const Eigen::Index N = X.cols();
    std::vector<CVector> means;
    std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
    means.push_back(X.col(pick(rng)));
    RVector dist = (X.colwise() - means.back()).colwise().squaredNorm().transpose();
    while (means.size() < K) {
        const double total = dist.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            for (chosen = 0; chosen < N - 1; ++chosen) {
                target -= dist(chosen);
                if (target <= 0.0)
                    break;
            }
        } else {
            chosen = pick(rng);
        }
        means.push_back(X.col(chosen));
        const RVector d_new = (X.colwise() - means.back()).colwise().squaredNorm().transpose();
        dist = dist.cwiseMin(d_new);
    }
    return means;
}

} // namespace

void GmmModel::validate() const
{
    const std::size_t K = components();
    if (K < 1)
        throw ParameterError("GMM has no components");
    if (means.size() != K || covs.size() != K)
        throw DimensionError("GMM component arrays have inconsistent lengths");
    const auto d = static_cast<Eigen::Index>(dim());
    for (std::size_t k = 0; k < K; ++k) {
        if (means[k].size() != d || covs[k].rows() != d || covs[k].cols() != d)
            throw DimensionError("GMM component " + std::to_string(k) + " has inconsistent dimension");
    }
    if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
        throw ParameterError("GMM weights are not on the probability simplex");
}

RVector complex_gaussian_logpdf(const CMatrix& x, const CVector& mean, const CMatrix& cov)
{
    return logpdf_columns(x, mean, factor(cov, "covariance"));
}

GmmFitResult gmm_fit(const CMatrix& samples, const GmmFitOptions& options, Rng& rng)
{
    const std::size_t K = options.components;
    const Eigen::Index N = samples.cols();
    const Eigen::Index d = samples.rows();
    if (K < 1)
        throw ParameterError("GMM needs at least one component");
    if (static_cast<std::size_t>(N) < K)
        throw ParameterError("GMM with " + std::to_string(K) + " components needs at least as many samples, got " +
                             std::to_string(N));
    if (options.max_iter < 1)
        throw ParameterError("EM needs at least one iteration");
    if (!(options.reg_floor >= 0.0))
        throw ParameterError("covariance floor must be nonnegative");

    const CVector global_mean = samples.rowwise().mean();
    const CMatrix centered = samples.colwise() - global_mean;
    const CMatrix global_cov = hermitian_part(centered * centered.adjoint() / static_cast<double>(N));
    if (!(global_cov.trace().real() > 0.0) && options.reg_floor == 0.0)
        throw DegenerateDataError("training samples are all identical and no covariance floor is set");

    GmmFitResult result;
    result.floor = options.reg_floor;
    const double lambda = result.floor * static_cast<double>(N);
    // Keeps (S_k + lambda I) / N_k finite if a component loses all support.
    const double min_mass = 1e-12 * static_cast<double>(N);

    GmmModel& model = result.model;
    model.weights = RVector::Constant(static_cast<Eigen::Index>(K), 1.0 / static_cast<double>(K));
    model.means = seed_means(samples, K, rng);
    CMatrix init_cov = global_cov;
    init_cov.diagonal().array() += result.floor;
    model.covs.assign(K, init_cov);

    RMatrix logp(static_cast<Eigen::Index>(K), N);

    // E-step: fills logp with posterior log responsibilities and returns
    // (log-likelihood, penalised objective) at the current parameters.
    auto expectation = [&](std::size_t iteration) -> std::pair<double, double> {
        double penalty = 0.0;
        const auto dd = static_cast<double>(d);
        for (std::size_t k = 0; k < K; ++k) {
            const Factored f = factor(model.covs[k], "covariance of component " + std::to_string(k) +
                                                         " at EM iteration " + std::to_string(iteration));
            CMatrix inv_l = CMatrix::Identity(d, d);
            f.llt.matrixL().solveInPlace(inv_l);
            inv_l.triangularView<Eigen::StrictlyUpper>().setZero();
            const CMatrix white = inv_l * (samples.colwise() - model.means[k]);
            logp.row(static_cast<Eigen::Index>(k)) =
                (-white.colwise().squaredNorm().array() - dd * log_pi - f.log_det +
                 std::log(model.weights(static_cast<Eigen::Index>(k))))
                    .matrix();
            if (lambda > 0.0)
                penalty += inv_l.squaredNorm(); // tr(C^{-1}) = ||L^{-1}||_F^2
        }
        double ll = 0.0;
        for (Eigen::Index n = 0; n < N; ++n) {
            const double lse = log_sum_exp(logp.col(n));
            logp.col(n).array() -= lse;
            ll += lse;
        }
        const double objective = ll - lambda * penalty;
        if (!std::isfinite(ll) || !std::isfinite(objective))
            throw NumericalError("non-finite log-likelihood at EM iteration " + std::to_string(iteration));
        return {ll, objective};
    };

    auto previous = expectation(0).second;
    for (std::size_t it = 1; it <= options.max_iter; ++it) {
        // M-step
        // flush subnormal responsibilities
        const RMatrix resp = (logp.array() < -700.0).select(0.0, logp.array().exp());
        for (std::size_t k = 0; k < K; ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            const double mass = std::max(resp.row(row).sum(), min_mass);
            model.weights(row) = resp.row(row).sum() / static_cast<double>(N);
            model.means[k] = samples * resp.row(row).transpose().cast<cplx>() / mass;
            const CMatrix dev = samples.colwise() - model.means[k];
            const CMatrix weighted = dev * resp.row(row).transpose().cast<cplx>().asDiagonal();
            CMatrix cov = hermitian_part(weighted * dev.adjoint());
            cov.diagonal().array() += lambda;
            model.covs[k] = cov / mass;
        }
        model.weights /= model.weights.sum();

        const auto [ll, objective] = expectation(it);
        result.log_likelihood.push_back(ll);
        result.objective.push_back(objective);
        if (std::abs(objective - previous) <= options.tol * std::abs(previous)) {
            result.converged = true;
            break;
        }
        previous = objective;
    }
    return result;
}

GmmEstimator::GmmEstimator(GmmModel model) : model_(std::move(model))
{
    model_.validate();
}

GmmEstimator::Bound::Bound(const GmmModel& model, const CMatrix& A, double noise_variance) : obs_dim_(A.rows())
{
    if (!(noise_variance >= 0.0))
        throw ParameterError("noise variance must be nonnegative");
    if (static_cast<std::size_t>(A.cols()) != model.dim())
        throw DimensionError("observation matrix has " + std::to_string(A.cols()) + " columns, GMM dimension is " +
                             std::to_string(model.dim()));
    comps_.reserve(model.components());
    for (std::size_t k = 0; k < model.components(); ++k) {
        Component c;
        c.log_weight = std::log(model.weights(static_cast<Eigen::Index>(k)));
        c.mean = model.means[k];
        c.observed_mean = A * model.means[k];
        const CMatrix CAh = model.covs[k] * A.adjoint();
        CMatrix Cy = hermitian_part(A * CAh);
        Cy.diagonal().array() += noise_variance;
        const Factored f = factor(Cy, "observation covariance of GMM component " + std::to_string(k));
        c.log_det = f.log_det;
        c.whitener = CMatrix::Identity(obs_dim_, obs_dim_);
        f.llt.matrixL().solveInPlace(c.whitener);
        c.gain = f.llt.solve(CAh.adjoint()).adjoint();
        comps_.push_back(std::move(c));
    }
}

RVector GmmEstimator::Bound::log_posterior(const CVector& y) const
{
    if (y.size() != obs_dim_)
        throw DimensionError("observation has length " + std::to_string(y.size()) + ", expected " +
                             std::to_string(obs_dim_));
    RVector lp(static_cast<Eigen::Index>(comps_.size()));
    const double n = static_cast<double>(obs_dim_);
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const auto& c = comps_[k];
        const double quad = (c.whitener * (y - c.observed_mean)).squaredNorm();
        lp(static_cast<Eigen::Index>(k)) = c.log_weight - n * log_pi - c.log_det - quad;
    }
    lp.array() -= log_sum_exp(lp);
    return lp;
}

RVector GmmEstimator::Bound::responsibilities(const CVector& y) const
{
    return log_posterior(y).array().exp();
}

CVector GmmEstimator::Bound::estimate(const CVector& y) const
{
    const RVector p = responsibilities(y);
    CVector h = CVector::Zero(comps_.front().mean.size());
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const double pk = p(static_cast<Eigen::Index>(k));
        if (pk == 0.0)
            continue;
        const auto& c = comps_[k];
        h += pk * (c.mean + c.gain * (y - c.observed_mean));
    }
    return h;
}

std::unique_ptr<GmmEstimator::Bound> GmmEstimator::bind_matrix(const CMatrix& A, double noise_variance) const
{
    return std::make_unique<Bound>(model_, A, noise_variance);
}

std::unique_ptr<BoundEstimator> GmmEstimator::bind(const PhaseMatrix& V, double noise_variance,
                                                   std::size_t antennas) const
{
    return bind_matrix(build_observation_matrix(V, antennas), noise_variance);
}

namespace {

CMatrix observation_matrix_for(const CVector& y, const PhaseMatrix& V)
{
    const auto nv = static_cast<Eigen::Index>(V.allocations());
    if (y.size() == 0 || y.size() % nv != 0)
        throw DimensionError("observation length " + std::to_string(y.size()) + " is not a multiple of N_v = " +
                             std::to_string(nv));
    return build_observation_matrix(V, static_cast<std::size_t>(y.size() / nv));
}

} // namespace

RVector gmm_responsibilities(const CVector& y, const PhaseMatrix& V, double noise_variance, const GmmModel& model)
{
    model.validate();
    return GmmEstimator::Bound(model, observation_matrix_for(y, V), noise_variance).responsibilities(y);
}

CVector gmm_estimate(const CVector& y, const PhaseMatrix& V, double noise_variance, const GmmModel& model)
{
    model.validate();
    return GmmEstimator::Bound(model, observation_matrix_for(y, V), noise_variance).estimate(y);
}

void save_gmm(const GmmModel& model, const std::filesystem::path& path)
{
    model.validate();
    binio::Writer w(path);
    w.magic("RGMM");
    w.u16(gmm_format_version);
    w.u32(static_cast<std::uint32_t>(model.components()));
    w.u32(static_cast<std::uint32_t>(model.dim()));
    for (Eigen::Index k = 0; k < model.weights.size(); ++k)
        w.f64(model.weights(k));
    for (const auto& m : model.means)
        for (Eigen::Index i = 0; i < m.size(); ++i)
            w.c128(m(i));
    for (const auto& c : model.covs)
        for (Eigen::Index i = 0; i < c.size(); ++i)
            w.c128(c.data()[i]);
    w.finish();
}

GmmModel load_gmm(const std::filesystem::path& path)
{
    binio::Reader r(path);
    r.expect_magic("RGMM");
    const auto version = r.u16();
    if (version != gmm_format_version)
        throw FormatError(FormatError::Kind::bad_version,
                          "'" + path.string() + "' has unsupported GMM version " + std::to_string(version));
    const std::uint64_t K = r.u32();
    const std::uint64_t d = r.u32();
    if (K < 1 || d < 1)
        throw FormatError(FormatError::Kind::bad_header, "'" + path.string() + "' declares an empty GMM");
    const std::uint64_t expected = K * 8 + K * d * 16 + K * d * d * 16;
    const std::uint64_t available = r.remaining();
    if (available < expected)
        throw FormatError(FormatError::Kind::truncated, "'" + path.string() + "' is truncated");
    if (available != expected)
        throw FormatError(FormatError::Kind::inconsistent, "'" + path.string() + "' has trailing bytes");

    GmmModel model;
    model.weights.resize(static_cast<Eigen::Index>(K));
    for (Eigen::Index k = 0; k < model.weights.size(); ++k)
        model.weights(k) = r.f64();
    model.means.assign(K, CVector(static_cast<Eigen::Index>(d)));
    for (auto& m : model.means)
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m(i) = r.c128();
    model.covs.assign(K, CMatrix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
    for (auto& c : model.covs)
        for (Eigen::Index i = 0; i < c.size(); ++i)
            c.data()[i] = r.c128();
    model.validate();
    return model;
}

} // namespace rispa
