#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "termalign/adjudicate.hpp"
#include "termalign/candidates.hpp"
#include "termalign/errors.hpp"
#include "termalign/hash.hpp"
#include "termalign/ontology.hpp"

namespace termalign {

struct OntologyInput {
    std::filesystem::path path;
    std::string source;
};

struct CrosswalkInput {
    std::filesystem::path path;
    std::string source_namespace;
    std::string target_namespace;
    XrefOrientation orientation = XrefOrientation::PivotToSource;
};

struct EmbeddingConfig {
    std::string kind = "fallback";   // fallback | http
    std::string endpoint;
    std::string model;
    std::string auth_env;
    std::size_t dim = 256;
    std::uint64_t seed = 1;
    std::size_t batch_size = 64;
    int retries = 2;
    double timeout_s = 30.0;
};

struct LlmConfig {
    std::string kind = "mock";       // mock | http
    std::string endpoint;
    std::string model = "mock";
    std::string auth_env;
    std::filesystem::path script;    // mock response script
    double temperature = 0.0;
    std::size_t concurrency = 4;
    int retries = 2;
    double timeout_s = 60.0;
};

struct ReportConfig {
    std::uint64_t at_most_n = 10;    // fan-out summary threshold
    std::size_t top_m = 5;
    bool post_adjudication = false;  // distribution over accepted pairs only
};

struct PipelineConfig {
    std::string catalog_version = "unversioned";
    std::vector<OntologyInput> ontologies;
    std::vector<CrosswalkInput> crosswalks;
    std::filesystem::path records;
    bool lenient = false;
    std::set<SynonymScope> synonym_scopes = all_synonym_scopes();
    EmbeddingConfig embedding;
    std::size_t k = 3;
    std::optional<double> score_threshold;
    LlmConfig llm;
    std::string criteria = "strict-generalization";
    std::filesystem::path output_dir = "out";
    ReportConfig report;

    // Canonical form with every default baked in; hashed into output headers.
    nlohmann::json resolved() const;
    std::string config_hash() const { return sha256_hex(resolved().dump()); }
};

inline nlohmann::json PipelineConfig::resolved() const {
    nlohmann::json onts = nlohmann::json::array();
    for (const OntologyInput& o : ontologies)
        onts.push_back({{"path", o.path.string()}, {"source", o.source}});
    nlohmann::json walks = nlohmann::json::array();
    for (const CrosswalkInput& w : crosswalks)
        walks.push_back({{"path", w.path.string()},
                         {"source_namespace", w.source_namespace},
                         {"target_namespace", w.target_namespace},
                         {"orientation", w.orientation == XrefOrientation::PivotToSource
                                             ? "pivot_to_source"
                                             : "source_to_pivot"}});
    nlohmann::json scopes = nlohmann::json::array();
    for (SynonymScope s : synonym_scopes) scopes.push_back(std::string(scope_to_string(s)));
    return {
        {"catalog_version", catalog_version},
        {"ontologies", onts},
        {"crosswalks", walks},
        {"records", records.string()},
        {"lenient", lenient},
        {"corpus", {{"synonym_scopes", scopes}}},
        {"embedding",
         {{"kind", embedding.kind},
          {"endpoint", embedding.endpoint},
          {"model", embedding.model},
          {"auth_env", embedding.auth_env},
          {"dim", embedding.dim},
          {"seed", embedding.seed},
          {"batch_size", embedding.batch_size},
          {"retries", embedding.retries},
          {"timeout_s", embedding.timeout_s}}},
        {"retrieval",
         {{"k", k},
          {"score_threshold",
           score_threshold ? nlohmann::json(*score_threshold) : nlohmann::json(nullptr)}}},
        {"llm",
         {{"kind", llm.kind},
          {"endpoint", llm.endpoint},
          {"model", llm.model},
          {"auth_env", llm.auth_env},
          {"script", llm.script.string()},
          {"temperature", llm.temperature},
          {"concurrency", llm.concurrency},
          {"retries", llm.retries},
          {"timeout_s", llm.timeout_s}}},
        {"criteria", criteria},
        {"report",
         {{"at_most_n", report.at_most_n},
          {"top_m", report.top_m},
          {"post_adjudication", report.post_adjudication}}},
    };
}

namespace detail {

inline std::filesystem::path resolve_path(const std::filesystem::path& base,
                                          const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute() || base.empty()) return path;
    return base / path;
}

}  // namespace detail

// Parses and validates a config document. Relative paths are resolved
// against `base_dir` (normally the config file's directory).
inline PipelineConfig parse_config(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir = {}) {
    PipelineConfig config;
    try {
        config.catalog_version = j.value("catalog_version", config.catalog_version);
        for (const auto& o : j.value("ontologies", nlohmann::json::array()))
            config.ontologies.push_back(
                {detail::resolve_path(base_dir, o.at("path").get<std::string>()),
                 o.at("source").get<std::string>()});
        for (const auto& w : j.value("crosswalks", nlohmann::json::array())) {
            CrosswalkInput input;
            input.path = detail::resolve_path(base_dir, w.at("path").get<std::string>());
            input.source_namespace = w.at("source_namespace").get<std::string>();
            input.target_namespace = w.at("target_namespace").get<std::string>();
            std::string orientation = w.value("orientation", "pivot_to_source");
            if (orientation == "pivot_to_source")
                input.orientation = XrefOrientation::PivotToSource;
            else if (orientation == "source_to_pivot")
                input.orientation = XrefOrientation::SourceToPivot;
            else
                throw ConfigInvalid("crosswalks.orientation must be pivot_to_source or "
                                    "source_to_pivot, got '" + orientation + "'");
            config.crosswalks.push_back(std::move(input));
        }
        if (j.contains("records"))
            config.records = detail::resolve_path(base_dir, j.at("records").get<std::string>());
        config.lenient = j.value("lenient", false);

        if (j.contains("corpus") && j.at("corpus").contains("synonym_scopes")) {
            config.synonym_scopes.clear();
            for (const auto& s : j.at("corpus").at("synonym_scopes"))
                config.synonym_scopes.insert(scope_from_string(s.get<std::string>()));
        }

        if (j.contains("embedding")) {
            const auto& e = j.at("embedding");
            config.embedding.kind = e.value("kind", config.embedding.kind);
            config.embedding.endpoint = e.value("endpoint", "");
            config.embedding.model = e.value("model", "");
            config.embedding.auth_env = e.value("auth_env", "");
            config.embedding.dim = e.value("dim", config.embedding.dim);
            config.embedding.seed = e.value("seed", config.embedding.seed);
            config.embedding.batch_size = e.value("batch_size", config.embedding.batch_size);
            config.embedding.retries = e.value("retries", config.embedding.retries);
            config.embedding.timeout_s = e.value("timeout_s", config.embedding.timeout_s);
        }
        if (j.contains("retrieval")) {
            const auto& r = j.at("retrieval");
            config.k = r.value("k", config.k);
            if (r.contains("score_threshold") && !r.at("score_threshold").is_null())
                config.score_threshold = r.at("score_threshold").get<double>();
        }
        if (j.contains("llm")) {
            const auto& l = j.at("llm");
            config.llm.kind = l.value("kind", config.llm.kind);
            config.llm.endpoint = l.value("endpoint", "");
            config.llm.model = l.value("model", config.llm.model);
            config.llm.auth_env = l.value("auth_env", "");
            if (l.contains("script"))
                config.llm.script =
                    detail::resolve_path(base_dir, l.at("script").get<std::string>());
            config.llm.temperature = l.value("temperature", config.llm.temperature);
            config.llm.concurrency = l.value("concurrency", config.llm.concurrency);
            config.llm.retries = l.value("retries", config.llm.retries);
            config.llm.timeout_s = l.value("timeout_s", config.llm.timeout_s);
        }
        config.criteria = j.value("criteria", config.criteria);
        if (j.contains("output_dir"))
            config.output_dir =
                detail::resolve_path(base_dir, j.at("output_dir").get<std::string>());
        if (j.contains("report")) {
            const auto& r = j.at("report");
            config.report.at_most_n = r.value("at_most_n", config.report.at_most_n);
            config.report.top_m = r.value("top_m", config.report.top_m);
            config.report.post_adjudication =
                r.value("post_adjudication", config.report.post_adjudication);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid(std::string("config: ") + e.what());
    }

    // invariants
    if (config.k == 0) throw ConfigInvalid("retrieval.k must be >= 1");
    if (config.embedding.dim == 0) throw ConfigInvalid("embedding.dim must be positive");
    if (config.embedding.batch_size == 0)
        throw ConfigInvalid("embedding.batch_size must be positive");
    if (config.llm.concurrency == 0) throw ConfigInvalid("llm.concurrency must be positive");
    if (config.embedding.kind != "fallback" && config.embedding.kind != "http")
        throw ConfigInvalid("embedding.kind must be 'fallback' or 'http'");
    if (config.llm.kind != "mock" && config.llm.kind != "http")
        throw ConfigInvalid("llm.kind must be 'mock' or 'http'");
    if (config.embedding.kind == "http") {
        if (config.embedding.endpoint.empty())
            throw ConfigInvalid("embedding.endpoint required for kind 'http'");
        if (config.embedding.auth_env.empty())
            throw ConfigInvalid("embedding.auth_env required for kind 'http'");
    }
    if (config.llm.kind == "http") {
        if (config.llm.endpoint.empty())
            throw ConfigInvalid("llm.endpoint required for kind 'http'");
        if (config.llm.auth_env.empty())
            throw ConfigInvalid("llm.auth_env required for kind 'http'");
    }
    builtin_criteria(config.criteria);   // throws ConfigInvalid when unknown
    return config;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid("config file " + path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

}  // namespace termalign
