#include "hdgee/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "hdgee/error.hpp"

namespace hdgee {
namespace {

using nlohmann::json;

const std::set<std::string, std::less<>> kKnownKeys = {
    "study",       "n",        "p",         "m",         "grid",
    "covariate_variance",      "covariate_rho",          "response_rho",
    "beta_pattern",            "replications",           "seed",
    "family",      "structures", "output",  "jobs",      "alpha",
    "max_exclusion_rate",      "max_regeneration_rate",  "max_retries",
    "wald_coordinates",        "fit"};

BetaPattern parse_pattern(const json& j) {
    if (j.is_array()) return {BetaPatternKind::Custom, j.get<std::vector<double>>()};
    const auto name = j.get<std::string>();
    if (name == "graded") return {BetaPatternKind::Graded, {}};
    if (name == "null-tail") return {BetaPatternKind::NullTail, {}};
    throw InvalidArgument(fmt::format("unknown beta_pattern '{}' (expected graded, null-tail or an array)", name));
}

}  // namespace

StudyKind parse_study_kind(std::string_view name) {
    if (name == "mse") return StudyKind::MseTable;
    if (name == "sandwich") return StudyKind::SandwichTable;
    if (name == "wald") return StudyKind::WaldNull;
    if (name == "highdim") return StudyKind::HighDimNull;
    throw InvalidArgument(fmt::format("unknown study '{}' (expected mse, sandwich or wald)", name));
}

StudyConfig parse_study_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(0, fmt::format("config is not valid JSON: {}", e.what()));
    }
    if (!doc.is_object()) throw ParseError(0, "config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (!kKnownKeys.contains(key)) throw ParseError(0, fmt::format("unknown config key '{}'", key));
    }
    StudyConfig c;
    try {
        if (doc.contains("study")) c.study = parse_study_kind(doc["study"].get<std::string>());
        if (c.study == StudyKind::WaldNull || c.study == StudyKind::HighDimNull) {
            c.design.n = 1000;
            c.design.p_override = 24;
            c.design.beta = {BetaPatternKind::NullTail, {}};
        }
        auto& d = c.design;
        if (doc.contains("n")) d.n = doc["n"].get<std::size_t>();
        if (doc.contains("p")) d.p_override = doc["p"].get<std::size_t>();
        if (doc.contains("m")) d.m = doc["m"].get<std::size_t>();
        if (doc.contains("covariate_variance")) d.covariate_variance = doc["covariate_variance"].get<double>();
        if (doc.contains("covariate_rho")) d.covariate_rho = doc["covariate_rho"].get<double>();
        if (doc.contains("response_rho")) d.response_rho = doc["response_rho"].get<double>();
        if (doc.contains("beta_pattern")) d.beta = parse_pattern(doc["beta_pattern"]);
        if (doc.contains("replications")) d.replications = doc["replications"].get<std::size_t>();
        if (doc.contains("seed")) d.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("family")) d.family = parse_family(doc["family"].get<std::string>());
        if (doc.contains("max_retries")) d.max_retries = doc["max_retries"].get<std::size_t>();
        if (doc.contains("max_regeneration_rate")) d.max_regeneration_rate = doc["max_regeneration_rate"].get<double>();
        if (doc.contains("grid")) {
            for (const auto& g : doc["grid"]) {
                SampleSize s{g.at("n").get<std::size_t>(), std::nullopt};
                if (g.contains("p")) s.p = g["p"].get<std::size_t>();
                c.grid.push_back(s);
            }
        }
        if (doc.contains("structures")) {
            for (const auto& s : doc["structures"]) c.structures.push_back(parse_structure(s.get<std::string>()));
        }
        if (doc.contains("output")) c.output_path = doc["output"].get<std::string>();
        if (doc.contains("jobs")) c.parallelism = doc["jobs"].get<std::size_t>();
        if (doc.contains("alpha")) c.alpha = doc["alpha"].get<double>();
        if (doc.contains("max_exclusion_rate")) c.max_exclusion_rate = doc["max_exclusion_rate"].get<double>();
        if (doc.contains("wald_coordinates")) {
            for (const auto& j : doc["wald_coordinates"]) {
                const auto one_based = j.get<std::size_t>();
                if (one_based == 0) throw InvalidArgument("wald_coordinates are 1-based");
                c.wald_coordinates.push_back(one_based - 1);
            }
        }
        if (doc.contains("fit")) {
            const auto& f = doc["fit"];
            if (f.contains("max_outer_iterations")) c.fit.max_outer_iterations = f["max_outer_iterations"].get<std::size_t>();
            if (f.contains("score_tolerance")) c.fit.score_tolerance = f["score_tolerance"].get<double>();
            if (f.contains("step_halving_max")) c.fit.step_halving_max = f["step_halving_max"].get<std::size_t>();
            if (f.contains("parameter_tolerance")) c.fit.parameter_tolerance = f["parameter_tolerance"].get<double>();
        }
    } catch (const json::exception& e) {
        throw ParseError(0, fmt::format("config has a value of the wrong type: {}", e.what()));
    }
    return c;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, fmt::format("cannot open config '{}'", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_study_config(buf.str());
}

}  // namespace hdgee
