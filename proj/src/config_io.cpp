#include "regmod/config_io.hpp"

#include "regmod/io.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace regmod {

double round_sig6(double x) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    double mag = std::floor(std::log10(std::fabs(x)));
    double scale = std::pow(10.0, 5.0 - mag);
    return std::nearbyint(x * scale) / scale;
}

namespace {

const std::set<std::string> kConfigKeys = {
    "levels",        "iters",       "step",          "sigma_fluid",
    "sigma_prop",    "similarity",  "lncc_window",   "mind_radius",
    "mind_dilation", "lambda",      "dual",          "pyramid",
    "correlation",   "corr_radius", "refine",        "bidirectional",
    "seed",          "feature_sigma", "feature_gradients", "feature_mind",
};

template <typename T>
T want(const nlohmann::json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
    }
}

SimilarityKind similarity_from_name(const std::string& s) {
    if (s == "mse") return SimilarityKind::Mse;
    if (s == "lncc") return SimilarityKind::Lncc;
    if (s == "mind") return SimilarityKind::Mind;
    throw std::invalid_argument("similarity must be one of mse, lncc, mind (got '" + s + "')");
}

const char* similarity_name(SimilarityKind k) {
    switch (k) {
        case SimilarityKind::Mse: return "mse";
        case SimilarityKind::Lncc: return "lncc";
        case SimilarityKind::Mind: return "mind";
    }
    return "lncc";
}

}  // namespace

RegConfig config_from_json(const nlohmann::json& j, RegConfig base) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!kConfigKeys.count(it.key()))
            throw std::invalid_argument("unknown config key '" + it.key() + "'");

    RegConfig c = base;
    if (j.contains("levels")) c.levels = want<int>(j, "levels");
    if (j.contains("iters")) c.iters = want<std::vector<int>>(j, "iters");
    if (j.contains("step")) c.step = want<double>(j, "step");
    if (j.contains("sigma_fluid")) c.sigma_fluid = want<double>(j, "sigma_fluid");
    if (j.contains("sigma_prop")) c.sigma_prop = want<double>(j, "sigma_prop");
    if (j.contains("similarity"))
        c.similarity = similarity_from_name(want<std::string>(j, "similarity"));
    if (j.contains("lncc_window")) c.lncc_window = want<int>(j, "lncc_window");
    if (j.contains("mind_radius")) c.mind_radius = want<int>(j, "mind_radius");
    if (j.contains("mind_dilation")) c.mind_dilation = want<int>(j, "mind_dilation");
    if (j.contains("lambda")) c.lambda = want<double>(j, "lambda");
    if (j.contains("dual")) c.dual = want<bool>(j, "dual");
    if (j.contains("pyramid")) c.pyramid = want<bool>(j, "pyramid");
    if (j.contains("correlation")) c.correlation = want<bool>(j, "correlation");
    if (j.contains("corr_radius")) c.corr_radius = want<int>(j, "corr_radius");
    if (j.contains("refine")) c.refine = want<std::vector<int>>(j, "refine");
    if (j.contains("bidirectional")) c.bidirectional = want<bool>(j, "bidirectional");
    if (j.contains("seed")) c.seed = want<std::uint64_t>(j, "seed");
    if (j.contains("feature_sigma")) c.features.sigma = want<double>(j, "feature_sigma");
    if (j.contains("feature_gradients")) c.features.gradients = want<bool>(j, "feature_gradients");
    if (j.contains("feature_mind")) c.features.mind = want<bool>(j, "feature_mind");
    c.features.mind_radius = c.mind_radius;
    c.features.mind_dilation = c.mind_dilation;
    return c;
}

RegConfig load_config(const std::string& path, RegConfig base) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path + ": invalid JSON: " + e.what());
    }
    return config_from_json(j, base);
}

nlohmann::json config_to_json(const RegConfig& cfg) {
    nlohmann::json j;
    j["levels"] = cfg.levels;
    j["iters"] = cfg.iters;
    j["step"] = round_sig6(cfg.step);
    j["sigma_fluid"] = round_sig6(cfg.sigma_fluid);
    j["sigma_prop"] = round_sig6(cfg.sigma_prop);
    j["similarity"] = similarity_name(cfg.similarity);
    j["lncc_window"] = cfg.lncc_window;
    j["mind_radius"] = cfg.mind_radius;
    j["mind_dilation"] = cfg.mind_dilation;
    j["lambda"] = round_sig6(cfg.lambda);
    j["dual"] = cfg.dual;
    j["pyramid"] = cfg.pyramid;
    j["correlation"] = cfg.correlation;
    j["corr_radius"] = cfg.corr_radius;
    j["refine"] = cfg.refine;
    j["bidirectional"] = cfg.bidirectional;
    j["seed"] = cfg.seed;
    j["feature_sigma"] = round_sig6(cfg.features.sigma);
    j["feature_gradients"] = cfg.features.gradients;
    j["feature_mind"] = cfg.features.mind;
    return j;
}

nlohmann::json direction_json(const DirectionResult& r) {
    nlohmann::json j;
    j["initial_loss"] = round_sig6(r.initial_loss_full);
    j["final_loss"] = round_sig6(r.final_loss_full);
    j["pyramid_loss"] = round_sig6(r.pyramid_loss);
    auto levels = nlohmann::json::array();
    for (double v : r.level_final_losses) levels.push_back(round_sig6(v));
    j["level_final_losses"] = levels;
    auto traces = nlohmann::json::array();
    for (const auto& t : r.traces) {
        nlohmann::json tj;
        tj["level"] = t.level;
        tj["round"] = t.round;
        tj["proposal_applied"] = t.proposal_applied;
        auto losses = nlohmann::json::array();
        for (double v : t.losses) losses.push_back(round_sig6(v));
        tj["losses"] = losses;
        traces.push_back(tj);
    }
    j["traces"] = traces;
    auto snaps = nlohmann::json::array();
    for (const auto& s : r.snapshots) {
        nlohmann::json sj;
        sj["level"] = s.level;
        sj["iteration"] = s.iteration;
        sj["similarity"] = round_sig6(s.sim_full);
        sj["mean_displacement"] = round_sig6(s.mean_disp_full);
        if (s.tre_mean_mm) sj["tre_mean_mm"] = round_sig6(*s.tre_mean_mm);
        if (s.dice_mean) sj["dice_mean"] = round_sig6(*s.dice_mean);
        if (s.sd_log_j) sj["sd_log_j"] = round_sig6(*s.sd_log_j);
        snaps.push_back(sj);
    }
    j["snapshots"] = snaps;
    return j;
}

nlohmann::json diagnostics_json(const RegResult& result, const RegConfig& cfg) {
    nlohmann::json j;
    j["config"] = config_to_json(cfg);
    nlohmann::json dirs;
    dirs["forward"] = direction_json(result.forward);
    if (result.backward) dirs["backward"] = direction_json(*result.backward);
    j["directions"] = dirs;
    return j;
}

}  // namespace regmod
