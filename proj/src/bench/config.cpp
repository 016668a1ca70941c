// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/bench/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rispa/errors.hpp"

namespace rispa::bench {

using nlohmann::json;

namespace {

template <typename Enum>
struct Names {
    Enum value;
    const char* name;
};

constexpr Names<Strategy> strategy_names[] = {
    {Strategy::dft_sub, "dft_sub"},
    {Strategy::random, "random"},
    {Strategy::dft_search, "dft_search"},
    {Strategy::learned, "learned"},
};

constexpr Names<EstimatorKind> estimator_names[] = {
    {EstimatorKind::ls, "ls"},
    {EstimatorKind::sample_cov, "sample_cov"},
    {EstimatorKind::gmm, "gmm"},
    {EstimatorKind::cnn, "cnn"},
};

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object())
        throw ParameterError("config: '" + where + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key))
            throw ParameterError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out)
{
    if (!obj.contains(key))
        return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParameterError(std::string("config: key '") + key + "' has the wrong type");
    }
}

// Accepts a number or the strings "inf" / "infinity".
double read_extended(const json& v, const char* key)
{
    if (v.is_number())
        return v.get<double>();
    if (v.is_string() && (v == "inf" || v == "infinity"))
        return std::numeric_limits<double>::infinity();
    throw ParameterError(std::string("config: key '") + key + "' must be a number or \"inf\"");
}

json extended(double x)
{
    return std::isinf(x) ? json("inf") : json(x);
}

void read_scenario(const json& j, ScenarioConfig& s)
{
    check_keys(j, "scenario",
               {"antennas", "elements", "ris_rows", "ris_cols", "orientation", "downtilt_deg", "direct_clusters",
                "mt_ris_clusters", "rician_k", "angle_spread_deg", "bs_ris_distance_m", "ris_azimuth_deg",
                "bs_height_m", "ris_height_m", "mt_height_m", "min_radius_m", "max_radius_m", "sector_deg", "seed"});
    read(j, "antennas", s.shape.antennas);
    read(j, "elements", s.shape.elements);
    read(j, "ris_rows", s.ris_rows);
    read(j, "ris_cols", s.ris_cols);
    if (j.contains("orientation")) {
        const auto o = j.at("orientation");
        if (o == "parallel")
            s.orientation = RisOrientation::parallel;
        else if (o == "downtilt")
            s.orientation = RisOrientation::downtilt;
        else
            throw ParameterError("config: orientation must be \"parallel\" or \"downtilt\"");
    }
    read(j, "downtilt_deg", s.downtilt_deg);
    read(j, "direct_clusters", s.direct_clusters);
    read(j, "mt_ris_clusters", s.mt_ris_clusters);
    if (j.contains("rician_k"))
        s.rician_k = read_extended(j.at("rician_k"), "rician_k");
    read(j, "angle_spread_deg", s.angle_spread_deg);
    read(j, "bs_ris_distance_m", s.bs_ris_distance_m);
    read(j, "ris_azimuth_deg", s.ris_azimuth_deg);
    read(j, "bs_height_m", s.bs_height_m);
    read(j, "ris_height_m", s.ris_height_m);
    read(j, "mt_height_m", s.mt_height_m);
    read(j, "min_radius_m", s.min_radius_m);
    read(j, "max_radius_m", s.max_radius_m);
    read(j, "sector_deg", s.sector_deg);
    read(j, "seed", s.seed);
}

json write_scenario(const ScenarioConfig& s)
{
    return {{"antennas", s.shape.antennas},
            {"elements", s.shape.elements},
            {"ris_rows", s.ris_rows},
            {"ris_cols", s.ris_cols},
            {"orientation", s.orientation == RisOrientation::parallel ? "parallel" : "downtilt"},
            {"downtilt_deg", s.downtilt_deg},
            {"direct_clusters", s.direct_clusters},
            {"mt_ris_clusters", s.mt_ris_clusters},
            {"rician_k", extended(s.rician_k)},
            {"angle_spread_deg", s.angle_spread_deg},
            {"bs_ris_distance_m", s.bs_ris_distance_m},
            {"ris_azimuth_deg", s.ris_azimuth_deg},
            {"bs_height_m", s.bs_height_m},
            {"ris_height_m", s.ris_height_m},
            {"mt_height_m", s.mt_height_m},
            {"min_radius_m", s.min_radius_m},
            {"max_radius_m", s.max_radius_m},
            {"sector_deg", s.sector_deg},
            {"seed", s.seed}};
}

void read_range(const json& j, const char* key, std::size_t& lo, std::size_t& hi)
{
    if (!j.contains(key))
        return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2)
        throw ParameterError(std::string("config: '") + key + "' must be a [min, max] pair");
    lo = v[0].get<std::size_t>();
    hi = v[1].get<std::size_t>();
}

void read_train(const json& j, ExperimentConfig& c)
{
    check_keys(j, "train",
               {"batch_size", "learning_rate", "epochs", "lr_decay", "snr_range_db", "beta1", "beta2", "adam_eps",
                "lock_first_row", "kernels", "layers", "activation", "batch_norm"});
    auto& t = c.train;
    read(j, "batch_size", t.batch_size);
    read(j, "learning_rate", t.learning_rate);
    read(j, "epochs", t.epochs);
    read(j, "lr_decay", t.lr_decay);
    read(j, "beta1", t.beta1);
    read(j, "beta2", t.beta2);
    read(j, "adam_eps", t.adam_eps);
    read(j, "lock_first_row", t.lock_first_row);
    read(j, "kernels", t.arch.kernels);
    read(j, "layers", t.arch.layers);
    read(j, "batch_norm", t.arch.batch_norm);
    if (j.contains("activation")) {
        std::string name;
        read(j, "activation", name);
        t.arch.activation = learn::activation_from_string(name);
    }
    if (j.contains("snr_range_db")) {
        const auto& v = j.at("snr_range_db");
        if (v.is_null())
            c.train_snr_range_db.reset();
        else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
            c.train_snr_range_db = std::pair{v[0].get<double>(), v[1].get<double>()};
        else
            throw ParameterError("config: 'snr_range_db' must be a [min, max] pair or null");
    }
}

void read_hyper(const json& j, HyperSettings& h)
{
    check_keys(j, "hyper_search", {"trials", "batch_log2", "learning_rate", "activations", "batch_norm", "kernels",
                                   "layers"});
    read(j, "trials", h.trials);
    auto& r = h.ranges;
    read_range(j, "batch_log2", r.batch_log2_min, r.batch_log2_max);
    read_range(j, "kernels", r.kernels_min, r.kernels_max);
    read_range(j, "layers", r.layers_min, r.layers_max);
    if (j.contains("learning_rate")) {
        const auto& v = j.at("learning_rate");
        if (!v.is_array() || v.size() != 2)
            throw ParameterError("config: 'learning_rate' must be a [min, max] pair");
        r.lr_min = v[0].get<double>();
        r.lr_max = v[1].get<double>();
    }
    if (j.contains("activations")) {
        std::vector<std::string> names;
        read(j, "activations", names);
        r.activations.clear();
        for (const auto& n : names)
            r.activations.push_back(learn::activation_from_string(n));
    }
    read(j, "batch_norm", r.allow_batch_norm);
}

void read_sweep(const json& j, Sweep& s)
{
    check_keys(j, "sweep", {"snr_db", "n_v"});
    const bool snr_list = j.contains("snr_db") && j.at("snr_db").is_array();
    const bool nv_list = j.contains("n_v") && j.at("n_v").is_array();
    if (snr_list && nv_list)
        throw ParameterError("config: sweep over either snr_db or n_v, not both");
    if (nv_list) {
        s.axis = Sweep::Axis::nv;
        read(j, "n_v", s.allocations);
        read(j, "snr_db", s.fixed_snr_db);
    } else {
        s.axis = Sweep::Axis::snr;
        read(j, "snr_db", s.snr_db);
        read(j, "n_v", s.fixed_allocations);
    }
}

json write_sweep(const Sweep& s)
{
    if (s.axis == Sweep::Axis::nv)
        return {{"n_v", s.allocations}, {"snr_db", s.fixed_snr_db}};
    return {{"snr_db", s.snr_db}, {"n_v", s.fixed_allocations}};
}

void apply_json(const json& j, ExperimentConfig& c)
{
    check_keys(j, "config",
               {"preset", "scenario", "dataset_path", "train_count", "test_count", "validation_count", "strategies",
                "estimators", "sweep", "seeds", "gmm", "train", "hyper_search", "search", "artifacts_dir", "output",
                "parallel"});
    if (j.contains("scenario"))
        read_scenario(j.at("scenario"), c.scenario);
    if (j.contains("dataset_path")) {
        if (j.at("dataset_path").is_null())
            c.dataset_path.reset();
        else
            c.dataset_path = j.at("dataset_path").get<std::string>();
    }
    read(j, "train_count", c.train_count);
    read(j, "test_count", c.test_count);
    read(j, "validation_count", c.validation_count);
    if (j.contains("strategies")) {
        std::vector<std::string> names;
        read(j, "strategies", names);
        c.strategies.clear();
        for (const auto& n : names)
            c.strategies.push_back(strategy_from_string(n));
    }
    if (j.contains("estimators")) {
        std::vector<std::string> names;
        read(j, "estimators", names);
        c.estimators.clear();
        for (const auto& n : names)
            c.estimators.push_back(estimator_from_string(n));
    }
    if (j.contains("sweep"))
        read_sweep(j.at("sweep"), c.sweep);
    read(j, "seeds", c.seeds);
    if (j.contains("gmm")) {
        const auto& g = j.at("gmm");
        check_keys(g, "gmm", {"components", "max_iter", "tol", "reg_floor"});
        read(g, "components", c.gmm.components);
        read(g, "max_iter", c.gmm.max_iter);
        read(g, "tol", c.gmm.tol);
        read(g, "reg_floor", c.gmm.reg_floor);
    }
    if (j.contains("train"))
        read_train(j.at("train"), c);
    if (j.contains("hyper_search"))
        read_hyper(j.at("hyper_search"), c.hyper);
    if (j.contains("search")) {
        const auto& s = j.at("search");
        check_keys(s, "search", {"estimator", "samples", "max_combinations"});
        if (s.contains("estimator")) {
            std::string name;
            read(s, "estimator", name);
            c.search.estimator = estimator_from_string(name);
        }
        read(s, "samples", c.search.samples);
        read(s, "max_combinations", c.search.max_combinations);
    }
    if (j.contains("artifacts_dir"))
        c.artifacts_dir = j.at("artifacts_dir").get<std::string>();
    if (j.contains("output"))
        c.output = j.at("output").get<std::string>();
    read(j, "parallel", c.parallel);
}

} // namespace

std::string to_string(Strategy s)
{
    for (const auto& n : strategy_names)
        if (n.value == s)
            return n.name;
    return "?";
}

std::string to_string(EstimatorKind e)
{
    for (const auto& n : estimator_names)
        if (n.value == e)
            return n.name;
    return "?";
}

Strategy strategy_from_string(const std::string& name)
{
    for (const auto& n : strategy_names)
        if (name == n.name)
            return n.value;
    throw ParameterError("unknown strategy '" + name + "' (expected dft_sub, random, dft_search or learned)");
}

EstimatorKind estimator_from_string(const std::string& name)
{
    for (const auto& n : estimator_names)
        if (name == n.name)
            return n.value;
    throw ParameterError("unknown estimator '" + name + "' (expected ls, sample_cov, gmm or cnn)");
}

std::vector<SweepPoint> Sweep::points() const
{
    std::vector<SweepPoint> out;
    if (axis == Axis::snr) {
        for (double s : snr_db)
            out.push_back({s, fixed_allocations});
    } else {
        for (std::size_t n : allocations)
            out.push_back({fixed_snr_db, n});
    }
    return out;
}

void ExperimentConfig::validate() const
{
    scenario.validate();
    const std::size_t columns = scenario.shape.columns();
    if (test_count < 1)
        throw ParameterError("test_count must be at least 1");
    if (strategies.empty() || estimators.empty())
        throw ParameterError("at least one strategy and one estimator are required");
    const auto pts = sweep.points();
    if (pts.empty())
        throw ParameterError("the sweep is empty");
    for (const auto& p : pts) {
        if (p.allocations < 1 || p.allocations > columns)
            throw ParameterError("N_v = " + std::to_string(p.allocations) + " is outside [1, " +
                                 std::to_string(columns) + "]");
        if (!std::isfinite(p.snr_db))
            throw ParameterError("SNR values must be finite");
    }
    if (seeds.empty())
        throw ParameterError("at least one seed is required");
    if (parallel < 1)
        throw ParameterError("parallel must be at least 1");
    const bool has_learned = std::find(strategies.begin(), strategies.end(), Strategy::learned) != strategies.end();
    if (std::find(estimators.begin(), estimators.end(), EstimatorKind::cnn) != estimators.end() && !has_learned)
        throw ParameterError("the cnn estimator needs the learned strategy");
    auto needs_training = [&](EstimatorKind e) {
        for (auto x : estimators)
            if (x == e)
                return true;
        return search.estimator == e &&
               std::find(strategies.begin(), strategies.end(), Strategy::dft_search) != strategies.end();
    };
    if ((needs_training(EstimatorKind::sample_cov) || needs_training(EstimatorKind::gmm)) && train_count < 1)
        throw ParameterError("sample_cov and gmm need train_count >= 1");
    if (needs_training(EstimatorKind::gmm) && train_count < gmm.components)
        throw ParameterError("gmm with " + std::to_string(gmm.components) + " components needs train_count >= " +
                             std::to_string(gmm.components));
    if (search.estimator == EstimatorKind::cnn)
        throw ParameterError("the DFT search cannot use the cnn estimator");
    if (has_learned) {
        if (validation_count >= train_count)
            throw ParameterError("validation_count must be smaller than train_count");
        learn::TrainConfig probe = train;
        probe.allocations = pts.front().allocations;
        probe.validate();
        if (hyper.trials > 0)
            hyper.ranges.validate();
    }
    if (train_snr_range_db && !(train_snr_range_db->first <= train_snr_range_db->second))
        throw ParameterError("snr_range_db must be an increasing pair");
}

std::vector<std::string> preset_names()
{
    return {"desk", "m8l16", "m16l64"};
}

ExperimentConfig preset(const std::string& name)
{
    ExperimentConfig c;
    c.preset = name;
    c.train.epochs = 40;
    c.train.learning_rate = 2e-3;
    c.train.arch.kernels = 32;
    c.train.arch.layers = 3;
    if (name == "desk") {
        c.scenario.shape = {4, 8};
        c.scenario.ris_rows = 2;
        c.scenario.ris_cols = 4;
        c.sweep.fixed_allocations = 4;
    } else if (name == "m8l16") {
        c.scenario.shape = {8, 16};
        c.scenario.ris_rows = 4;
        c.scenario.ris_cols = 4;
        c.sweep.fixed_allocations = 8;
    } else if (name == "m16l64") {
        c.scenario.shape = {16, 64};
        c.scenario.ris_rows = 8;
        c.scenario.ris_cols = 8;
        c.sweep.fixed_allocations = 16;
        c.gmm.components = 32;
    } else {
        throw ParameterError("unknown preset '" + name + "' (expected desk, m8l16 or m16l64)");
    }
    return c;
}

ExperimentConfig parse_config(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParameterError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ParameterError("config must be a JSON object");
    std::string name = "desk";
    read(j, "preset", name);
    ExperimentConfig c = preset(name);
    try {
        apply_json(j, c);
    } catch (const json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string dump_config(const ExperimentConfig& c)
{
    json strategies = json::array();
    for (auto s : c.strategies)
        strategies.push_back(to_string(s));
    json estimators = json::array();
    for (auto e : c.estimators)
        estimators.push_back(to_string(e));
    json activations = json::array();
    for (auto a : c.hyper.ranges.activations)
        activations.push_back(learn::to_string(a));
    const auto& t = c.train;
    const auto& r = c.hyper.ranges;
    json j = {
        {"preset", c.preset},
        {"scenario", write_scenario(c.scenario)},
        {"dataset_path", c.dataset_path ? json(c.dataset_path->string()) : json(nullptr)},
        {"train_count", c.train_count},
        {"test_count", c.test_count},
        {"validation_count", c.validation_count},
        {"strategies", strategies},
        {"estimators", estimators},
        {"sweep", write_sweep(c.sweep)},
        {"seeds", c.seeds},
        {"gmm",
         {{"components", c.gmm.components},
          {"max_iter", c.gmm.max_iter},
          {"tol", c.gmm.tol},
          {"reg_floor", c.gmm.reg_floor}}},
        {"train",
         {{"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"epochs", t.epochs},
          {"lr_decay", t.lr_decay},
          {"snr_range_db", c.train_snr_range_db
                               ? json::array({c.train_snr_range_db->first, c.train_snr_range_db->second})
                               : json(nullptr)},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},
          {"lock_first_row", t.lock_first_row},
          {"kernels", t.arch.kernels},
          {"layers", t.arch.layers},
          {"activation", learn::to_string(t.arch.activation)},
          {"batch_norm", t.arch.batch_norm}}},
        {"hyper_search",
         {{"trials", c.hyper.trials},
          {"batch_log2", {r.batch_log2_min, r.batch_log2_max}},
          {"learning_rate", {r.lr_min, r.lr_max}},
          {"activations", activations},
          {"batch_norm", r.allow_batch_norm},
          {"kernels", {r.kernels_min, r.kernels_max}},
          {"layers", {r.layers_min, r.layers_max}}}},
        {"search",
         {{"estimator", to_string(c.search.estimator)},
          {"samples", c.search.samples},
          {"max_combinations", c.search.max_combinations}}},
        {"artifacts_dir", c.artifacts_dir.string()},
        {"output", c.output.string()},
        {"parallel", c.parallel},
    };
    return j.dump(2);
}

} // namespace rispa::bench
