// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/bench/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rispa/errors.hpp"
#include "rispa/estimators.hpp"
#include "rispa/gmm.hpp"
#include "rispa/learn/trainer.hpp"

namespace rispa::bench {

using nlohmann::json;

namespace {

// seed-stream tags
constexpr std::uint64_t tag_gmm = 0x676d6d;
constexpr std::uint64_t tag_cnn = 0x636e6e;
constexpr std::uint64_t tag_hyper = 0x6879706572;
constexpr std::uint64_t tag_search = 0x736561726368;
constexpr std::uint64_t tag_random = 0x72616e646f6d;
constexpr std::uint64_t tag_noise = 0x6e6f697365;

class Fnv {
public:
    Fnv& bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= b[i];
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv& str(const std::string& s) { return bytes(s.data(), s.size()).bytes("|", 1); }
    template <typename T>
    Fnv& pod(const T& v)
    {
        return bytes(&v, sizeof v);
    }
    std::uint64_t value() const noexcept { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string point_label(const SweepPoint& p)
{
    return "N_v=" + std::to_string(p.allocations) + ", SNR=" + fmt(p.snr_db) + " dB";
}

void emit(const Logger& log, const std::string& msg)
{
    static std::mutex m;
    if (!log)
        return;
    std::lock_guard lock(m);
    log(msg);
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn)
{
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::mutex m;
    std::size_t next = 0;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(m);
                if (error || next == n)
                    return;
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(m);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

std::uint64_t noise_seed(std::uint64_t seed, const SweepPoint& p)
{
    return derive_seed(derive_seed(seed, tag_noise), p.allocations);
}

std::vector<CMatrix> estimate_all(const BoundEstimator& est, std::span<const CMatrix> channels, const PhaseMatrix& V,
                                  double noise_variance, std::uint64_t seed)
{
    std::vector<CMatrix> out(channels.size());
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const CMatrix& H = channels[i];
        Rng rng(derive_seed(seed, i));
        const CMatrix Y = H * V.values() + draw_noise(static_cast<std::size_t>(H.rows()), V.allocations(),
                                                      noise_variance, rng);
        out[i] = unvectorize(est.estimate(vectorize(Y)), static_cast<std::size_t>(H.rows()),
                             static_cast<std::size_t>(H.cols()));
    }
    return out;
}

GmmModel require_gmm(const Workspace& ws, std::uint64_t seed)
{
    const auto path = ws.gmm_path(seed);
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("GMM for seed " + std::to_string(seed) + " not found at '" + path.string() +
                                       "'; run `fit-gmm` with this config first",
                                   "fit-gmm");
    return load_gmm(path);
}

learn::PhaseCnnModel require_cnn(const Workspace& ws, std::uint64_t seed, const SweepPoint& p)
{
    const auto path = ws.cnn_path(seed, p);
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("CNN checkpoint for seed " + std::to_string(seed) + ", " + point_label(p) +
                                       " not found at '" + path.string() + "'; run `train-cnn` with this config first",
                                   "train-cnn");
    auto model = learn::load_checkpoint(path);
    const auto shape = ws.config().shape();
    if (model.cnn.antennas != shape.antennas || model.cnn.columns != shape.columns() ||
        model.cnn.allocations != p.allocations)
        throw DimensionError("checkpoint '" + path.string() + "' is for M=" + std::to_string(model.cnn.antennas) +
                             ", L=" + std::to_string(model.cnn.columns - 1) +
                             ", N_v=" + std::to_string(model.cnn.allocations) + " but the config needs M=" +
                             std::to_string(shape.antennas) + ", L=" + std::to_string(shape.elements) +
                             ", N_v=" + std::to_string(p.allocations));
    return model;
}

std::unique_ptr<ChannelEstimator> search_estimator(const Workspace& ws, std::uint64_t seed)
{
    switch (ws.config().search.estimator) {
    case EstimatorKind::ls:
        return std::make_unique<LsEstimator>();
    case EstimatorKind::sample_cov:
        return std::make_unique<SampleCovEstimator>(lmmse_sample_cov_fit(ws.train_matrix()));
    case EstimatorKind::gmm:
        return std::make_unique<GmmEstimator>(require_gmm(ws, seed));
    case EstimatorKind::cnn:
        break;
    }
    throw ParameterError("the DFT search cannot use the cnn estimator");
}

DftSearchResult search(const Workspace& ws, std::uint64_t seed, const SweepPoint& p)
{
    const auto& c = ws.config();
    const auto train = ws.train();
    const std::size_t n = std::min(c.search.samples, train.size());
    if (n < 1)
        throw ParameterError("the DFT search needs at least one training sample");
    DftSearchOptions opts;
    opts.allocations = p.allocations;
    opts.noise_variance = snr_to_noise_variance(p.snr_db);
    opts.seed = derive_seed(seed, tag_search);
    opts.max_combinations = c.search.max_combinations;
    const auto est = search_estimator(ws, seed);
    return exhaustive_dft_search(train.subspan(0, n), *est, opts);
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out)
        throw IoError("write to '" + path.string() + "' failed");
}

void ensure_dir(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

} // namespace

ChannelDataset make_dataset(const ExperimentConfig& config)
{
    const std::size_t needed = config.train_count + config.test_count;
    if (!config.dataset_path)
        return generate(config.scenario, needed);
    const auto& path = *config.dataset_path;
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("dataset '" + path.string() + "' not found; run `generate-data` first",
                                   "generate-data");
    ChannelDataset ds = load(path);
    if (ds.shape.antennas != config.shape().antennas || ds.shape.elements != config.shape().elements)
        throw DimensionError("dataset '" + path.string() + "' has M=" + std::to_string(ds.shape.antennas) +
                             ", L=" + std::to_string(ds.shape.elements) + " but the config expects M=" +
                             std::to_string(config.shape().antennas) + ", L=" + std::to_string(config.shape().elements));
    return ds;
}

Workspace::Workspace(ExperimentConfig config) : config_(std::move(config))
{
    config_.validate();
    ChannelDataset ds = make_dataset(config_);
    const std::size_t needed = config_.train_count + config_.test_count;
    if (ds.size() < needed)
        throw DimensionError("dataset has " + std::to_string(ds.size()) + " samples but train_count + test_count = " +
                             std::to_string(needed));
    double factor = 1.0;
    if (!ds.normalized) {
        ChannelDataset ref;
        ref.shape = ds.shape;
        const std::size_t ref_count = config_.train_count > 0 ? config_.train_count : needed;
        ref.samples.assign(ds.samples.begin(), ds.samples.begin() + static_cast<std::ptrdiff_t>(ref_count));
        factor = normalization_factor(ref);
    }
    channels_.reserve(needed);
    Fnv h;
    for (std::size_t i = 0; i < needed; ++i) {
        channels_.push_back(ds.samples[i].scaled(factor).composite());
        const CMatrix& H = channels_.back();
        h.bytes(H.data(), static_cast<std::size_t>(H.size()) * sizeof(cplx));
    }
    h.pod(config_.train_count).pod(config_.test_count).pod(config_.validation_count);
    fingerprint_ = h.value();
}

std::span<const CMatrix> Workspace::train() const
{
    return {channels_.data(), config_.train_count};
}

std::span<const CMatrix> Workspace::cnn_train() const
{
    return {channels_.data(), config_.train_count - config_.validation_count};
}

std::span<const CMatrix> Workspace::validation() const
{
    return {channels_.data() + config_.train_count - config_.validation_count, config_.validation_count};
}

std::span<const CMatrix> Workspace::test() const
{
    return {channels_.data() + config_.train_count, config_.test_count};
}

CMatrix Workspace::train_matrix() const
{
    const auto d = static_cast<Eigen::Index>(config_.shape().composite_dim());
    CMatrix X(d, static_cast<Eigen::Index>(config_.train_count));
    for (std::size_t i = 0; i < config_.train_count; ++i)
        X.col(static_cast<Eigen::Index>(i)) = vectorize(channels_[i]);
    return X;
}

std::filesystem::path Workspace::gmm_path(std::uint64_t seed) const
{
    const auto& g = config_.gmm;
    Fnv h;
    h.str("gmm").pod(fingerprint_).pod(g.components).pod(g.max_iter).pod(g.tol).pod(g.reg_floor).pod(seed);
    return config_.artifacts_dir / ("gmm-" + hex(h.value()) + ".rgmm");
}

std::filesystem::path Workspace::cnn_path(std::uint64_t seed, const SweepPoint& p) const
{
    const auto& t = config_.train;
    Fnv h;
    h.str("cnn").pod(fingerprint_).pod(p.allocations).pod(p.snr_db).pod(seed);
    h.pod(t.batch_size).pod(t.learning_rate).pod(t.epochs).pod(t.lr_decay).pod(t.beta1).pod(t.beta2).pod(t.adam_eps);
    h.pod(t.lock_first_row).pod(t.arch.kernels).pod(t.arch.layers).pod(t.arch.activation).pod(t.arch.batch_norm);
    if (config_.train_snr_range_db)
        h.pod(config_.train_snr_range_db->first).pod(config_.train_snr_range_db->second);
    h.pod(config_.hyper.trials);
    if (config_.hyper.trials > 0) {
        const auto& r = config_.hyper.ranges;
        h.pod(r.batch_log2_min).pod(r.batch_log2_max).pod(r.lr_min).pod(r.lr_max).pod(r.allow_batch_norm);
        h.pod(r.kernels_min).pod(r.kernels_max).pod(r.layers_min).pod(r.layers_max);
        for (auto a : r.activations)
            h.pod(a);
    }
    return config_.artifacts_dir / ("cnn-" + hex(h.value()) + ".rcnn");
}

std::filesystem::path Workspace::search_path(std::uint64_t seed, const SweepPoint& p) const
{
    const auto& s = config_.search;
    Fnv h;
    h.str("search").pod(fingerprint_).pod(p.allocations).pod(p.snr_db).pod(seed);
    h.pod(s.estimator).pod(s.samples).pod(s.max_combinations);
    if (s.estimator == EstimatorKind::gmm)
        h.str(gmm_path(seed).filename().string());
    return config_.artifacts_dir / ("search-" + hex(h.value()) + ".json");
}

std::vector<std::filesystem::path> fit_gmm_artifacts(const Workspace& ws, const Logger& log)
{
    const auto& c = ws.config();
    ensure_dir(c.artifacts_dir);
    const CMatrix X = ws.train_matrix();
    std::vector<std::filesystem::path> paths(c.seeds.size());
    parallel_for(c.seeds.size(), c.parallel, [&](std::size_t i) {
        const auto seed = c.seeds[i];
        paths[i] = ws.gmm_path(seed);
        if (std::filesystem::exists(paths[i])) {
            emit(log, "gmm seed " + std::to_string(seed) + ": cached " + paths[i].string());
            return;
        }
        Rng rng(derive_seed(seed, tag_gmm));
        const auto fit = gmm_fit(X, c.gmm, rng);
        save_gmm(fit.model, paths[i]);
        emit(log, "gmm seed " + std::to_string(seed) + ": K=" + std::to_string(c.gmm.components) + ", " +
                      std::to_string(fit.objective.size()) + " EM iterations" +
                      (fit.converged ? "" : " (not converged)") + ", log-likelihood " +
                      fmt(fit.log_likelihood.empty() ? 0.0 : fit.log_likelihood.back()) + " -> " +
                      paths[i].string());
    });
    return paths;
}

std::vector<std::filesystem::path> train_cnn_artifacts(const Workspace& ws, const Logger& log)
{
    const auto& c = ws.config();
    ensure_dir(c.artifacts_dir);
    const auto points = c.sweep.points();
    const std::size_t n = c.seeds.size() * points.size();
    std::vector<std::filesystem::path> paths(n);
    parallel_for(n, c.parallel, [&](std::size_t i) {
        const auto seed = c.seeds[i / points.size()];
        const auto& p = points[i % points.size()];
        paths[i] = ws.cnn_path(seed, p);
        if (std::filesystem::exists(paths[i])) {
            emit(log, "cnn seed " + std::to_string(seed) + ", " + point_label(p) + ": cached " + paths[i].string());
            return;
        }
        learn::TrainConfig t = c.train;
        t.allocations = p.allocations;
        t.snr_db = p.snr_db;
        t.snr_max_db.reset();
        if (c.train_snr_range_db) {
            t.snr_db = c.train_snr_range_db->first;
            t.snr_max_db = c.train_snr_range_db->second;
        }
        t.seed = derive_seed(seed, tag_cnn);
        learn::TrainResult result;
        if (c.hyper.trials > 0) {
            auto hs = learn::hyper_search(ws.cnn_train(), ws.validation(), t, c.hyper.ranges, c.hyper.trials,
                                          derive_seed(seed, tag_hyper));
            result = std::move(hs.best);
        } else {
            result = learn::train_joint(ws.cnn_train(), ws.validation(), t);
        }
        learn::save_checkpoint(result.model, paths[i]);
        auto log_path = paths[i];
        log_path.replace_extension(".log.csv");
        learn::write_training_log(result.log, log_path);
        const auto& last = result.log.back();
        emit(log, "cnn seed " + std::to_string(seed) + ", " + point_label(p) + ": " + std::to_string(last.epoch) +
                      " epochs, validation NMSE " + fmt(last.val_nmse) + " -> " + paths[i].string());
    });
    return paths;
}

std::vector<std::filesystem::path> search_dft_artifacts(const Workspace& ws, const Logger& log)
{
    const auto& c = ws.config();
    ensure_dir(c.artifacts_dir);
    const auto points = c.sweep.points();
    const std::size_t n = c.seeds.size() * points.size();
    std::vector<std::filesystem::path> paths(n);
    parallel_for(n, c.parallel, [&](std::size_t i) {
        const auto seed = c.seeds[i / points.size()];
        const auto& p = points[i % points.size()];
        paths[i] = ws.search_path(seed, p);
        if (std::filesystem::exists(paths[i])) {
            emit(log, "search seed " + std::to_string(seed) + ", " + point_label(p) + ": cached " + paths[i].string());
            return;
        }
        const auto r = search(ws, seed, p);
        json j = {{"n_v", p.allocations},
                  {"snr_db", p.snr_db},
                  {"estimator", to_string(c.search.estimator)},
                  {"combinations", r.combinations},
                  {"best_average_set", r.best_average_set},
                  {"best_average_nmse", r.best_average_nmse},
                  {"histogram", r.histogram}};
        write_text(paths[i], j.dump(2) + "\n");
        std::string set;
        for (auto col : r.best_average_set)
            set += (set.empty() ? "" : ",") + std::to_string(col);
        emit(log, "search seed " + std::to_string(seed) + ", " + point_label(p) + ": " +
                      std::to_string(r.combinations) + " combinations, best average set {" + set + "} -> " +
                      paths[i].string());
    });
    return paths;
}

PhaseMatrix phase_matrix_for(const Workspace& ws, Strategy strategy, std::uint64_t seed, const SweepPoint& p)
{
    const std::size_t L = ws.config().shape().elements;
    switch (strategy) {
    case Strategy::dft_sub:
        return dft_submatrix(L, p.allocations);
    case Strategy::random: {
        Rng rng(derive_seed(derive_seed(seed, tag_random), p.allocations));
        return random_phases(L, p.allocations, rng);
    }
    case Strategy::dft_search: {
        const auto path = ws.search_path(seed, p);
        if (!std::filesystem::exists(path))
            throw MissingArtifactError("DFT search result for seed " + std::to_string(seed) + ", " + point_label(p) +
                                           " not found at '" + path.string() +
                                           "'; run `search-dft` with this config first",
                                       "search-dft");
        std::ifstream in(path);
        json j;
        try {
            in >> j;
            const auto set = j.at("best_average_set").get<std::vector<std::size_t>>();
            return dft_column_subset(L, set);
        } catch (const json::exception& e) {
            throw FormatError(FormatError::Kind::inconsistent, "'" + path.string() + "': " + e.what());
        }
    }
    case Strategy::learned:
        return learn::export_phases(require_cnn(ws, seed, p));
    }
    throw ParameterError("unknown strategy");
}

std::vector<ResultRecord> run_experiment(const Workspace& ws, const Logger& log)
{
    const auto& c = ws.config();
    const auto points = c.sweep.points();
    const auto test = ws.test();
    const std::size_t M = c.shape().antennas;

    const bool wants_cov = std::find(c.estimators.begin(), c.estimators.end(), EstimatorKind::sample_cov) !=
                           c.estimators.end();
    std::unique_ptr<SampleCovEstimator> sample_cov;
    if (wants_cov)
        sample_cov = std::make_unique<SampleCovEstimator>(lmmse_sample_cov_fit(ws.train_matrix()));
    const bool wants_gmm = std::find(c.estimators.begin(), c.estimators.end(), EstimatorKind::gmm) !=
                           c.estimators.end();
    std::vector<std::unique_ptr<GmmEstimator>> gmms(c.seeds.size());
    if (wants_gmm)
        for (std::size_t s = 0; s < c.seeds.size(); ++s)
            gmms[s] = std::make_unique<GmmEstimator>(require_gmm(ws, c.seeds[s]));
    const LsEstimator ls;

    const std::size_t per_task = c.strategies.size() * c.estimators.size();
    std::vector<std::vector<std::optional<ResultRecord>>> slots(c.seeds.size() * points.size());
    parallel_for(slots.size(), c.parallel, [&](std::size_t task) {
        const std::size_t si = task / points.size();
        const auto seed = c.seeds[si];
        const auto& p = points[task % points.size()];
        const double var = snr_to_noise_variance(p.snr_db);
        const auto nseed = noise_seed(seed, p);
        auto& out = slots[task];
        out.resize(per_task);
        for (std::size_t a = 0; a < c.strategies.size(); ++a) {
            const auto strategy = c.strategies[a];
            const PhaseMatrix V = phase_matrix_for(ws, strategy, seed, p);
            for (std::size_t e = 0; e < c.estimators.size(); ++e) {
                const auto kind = c.estimators[e];
                // the CNN estimates with its own jointly learned phases only
                if (kind == EstimatorKind::cnn && strategy != Strategy::learned)
                    continue;
                ResultRecord r;
                r.strategy = to_string(strategy);
                r.estimator = to_string(kind);
                r.snr_db = p.snr_db;
                r.n_v = p.allocations;
                r.samples = test.size();
                r.seed = seed;
                if (kind == EstimatorKind::cnn) {
                    r.nmse = learn::evaluate_nmse(require_cnn(ws, seed, p), test, p.snr_db, nseed);
                } else {
                    const ChannelEstimator* est = &ls;
                    if (kind == EstimatorKind::sample_cov)
                        est = sample_cov.get();
                    else if (kind == EstimatorKind::gmm)
                        est = gmms[si].get();
                    const auto bound = est->bind(V, var, M);
                    if (const auto* lsb = dynamic_cast<const LsEstimator::Bound*>(bound.get()))
                        r.underdetermined = lsb->rank_deficient();
                    r.nmse = nmse(test, estimate_all(*bound, test, V, var, nseed));
                }
                if (r.underdetermined)
                    emit(log, "note: LS is under-determined for " + r.strategy + " at " + point_label(p) +
                                  " (rank(V) < L+1)");
                out[a * c.estimators.size() + e] = std::move(r);
            }
        }
    });

    // order by (seed, strategy, estimator, sweep value)
    std::vector<ResultRecord> records;
    records.reserve(slots.size() * per_task);
    for (std::size_t si = 0; si < c.seeds.size(); ++si)
        for (std::size_t a = 0; a < c.strategies.size(); ++a)
            for (std::size_t e = 0; e < c.estimators.size(); ++e)
                for (std::size_t pi = 0; pi < points.size(); ++pi)
                    if (auto& r = slots[si * points.size() + pi][a * c.estimators.size() + e])
                        records.push_back(std::move(*r));
    return records;
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config, const Logger& log)
{
    const Workspace ws(config);
    auto records = run_experiment(ws, log);
    write_results_csv(records, config.output);
    return records;
}

DftSearchResult run_dft_histogram(const Workspace& ws, const std::filesystem::path& path, const Logger& log)
{
    const auto& c = ws.config();
    const auto p = c.sweep.points().front();
    const auto seed = c.seeds.front();
    auto r = search(ws, seed, p);
    if (path.has_parent_path())
        ensure_dir(path.parent_path());
    write_histogram_csv(r, path);
    std::string best = "column\n";
    for (auto col : r.best_average_set)
        best += std::to_string(col) + "\n";
    auto best_path = path;
    best_path.replace_filename(path.stem().string() + "_best_set.csv");
    write_text(best_path, best);
    emit(log, "histogram " + point_label(p) + ", seed " + std::to_string(seed) + ": " +
                  std::to_string(r.combinations) + " combinations over " + std::to_string(r.per_sample_best.size()) +
                  " samples -> " + path.string());
    return r;
}

void write_results_csv(std::span<const ResultRecord> records, const std::filesystem::path& path)
{
    std::string text = "strategy,estimator,snr_db,n_v,nmse,samples,seed\n";
    for (const auto& r : records)
        text += r.strategy + "," + r.estimator + "," + fmt(r.snr_db) + "," + std::to_string(r.n_v) + "," +
                fmt(r.nmse) + "," + std::to_string(r.samples) + "," + std::to_string(r.seed) + "\n";
    write_text(path, text);
}

} // namespace rispa::bench
