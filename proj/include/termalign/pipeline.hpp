#pragma once

// File-staged pipeline behind the CLI: every stage reads the previous
// stage's artifacts, stamps its outputs with the resolved-config hash and
// input content hashes, and rewrites byte-identical files when nothing
// changed. Intermediate files are plain JSONL/TSV so human experts can audit
// or edit candidate pairs and decisions between stages.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "termalign/adjudicate.hpp"
#include "termalign/candidates.hpp"
#include "termalign/config.hpp"
#include "termalign/corpus.hpp"
#include "termalign/errors.hpp"
#include "termalign/eval.hpp"
#include "termalign/index.hpp"
#include "termalign/ontology.hpp"
#include "termalign/providers_http.hpp"
#include "termalign/text.hpp"

namespace termalign {

struct PipelinePaths {
    std::filesystem::path out;

    std::filesystem::path catalog() const { return out / "catalog.jsonl"; }
    std::filesystem::path crosswalk(const CrosswalkInput& w) const {
        return out / ("xref_" + w.source_namespace + "_to_" + w.target_namespace + ".tsv");
    }
    std::filesystem::path corpus() const { return out / "corpus.jsonl"; }
    std::filesystem::path index() const { return out / "index.tsv"; }
    std::filesystem::path pairs_rag() const { return out / "pairs_rag.jsonl"; }
    std::filesystem::path pairs_xref() const { return out / "pairs_xref.jsonl"; }
    std::filesystem::path pairs_merged() const { return out / "pairs_merged.jsonl"; }
    std::filesystem::path diag_rag() const { return out / "diag_rag.tsv"; }
    std::filesystem::path diag_xref() const { return out / "diag_xref.tsv"; }
    std::filesystem::path decisions() const { return out / "decisions.jsonl"; }
    std::filesystem::path llm_cache() const { return out / "llm_cache.jsonl"; }
    std::filesystem::path report() const { return out / "report.json"; }
    std::filesystem::path audit_sample() const { return out / "audit_sample.csv"; }
};

inline PipelinePaths pipeline_paths(const PipelineConfig& config) {
    return {config.output_dir};
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::string file_hash(const std::filesystem::path& path) {
    return sha256_hex(read_file(path));
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write: " + path.string());
    out << bytes;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("missing input: " + path.string());
    return in;
}

}  // namespace detail

// --- ingest -----------------------------------------------------------------

// Parses the configured ontologies and crosswalks into the catalog dump and
// normalized crosswalk tables.
inline void cmd_ingest(const PipelineConfig& config) {
    if (config.ontologies.empty()) throw ConfigInvalid("no ontologies configured");
    PipelinePaths paths = pipeline_paths(config);
    ParseMode mode = config.lenient ? ParseMode::Lenient : ParseMode::Strict;

    std::vector<std::vector<OntologyTerm>> parsed;
    nlohmann::json input_hashes = nlohmann::json::object();
    std::size_t issue_count = 0;
    for (const OntologyInput& input : config.ontologies) {
        std::string bytes = detail::read_file(input.path);
        input_hashes[input.path.filename().string()] = sha256_hex(bytes);
        std::istringstream in(bytes);
        OboParseResult result = parse_obo(in, input.source, mode);
        for (const ParseIssue& issue : result.issues)
            std::cerr << input.path.string() << ":" << issue.line << ": " << issue.message
                      << "\n";
        issue_count += result.issues.size();
        parsed.push_back(std::move(result.terms));
    }
    TermCatalog catalog = build_catalog(parsed);

    std::ostringstream body;
    for (const auto& [id, term] : catalog.terms) body << term_to_json(term).dump() << '\n';
    std::string catalog_ref =
        config.catalog_version + "@" + sha256_hex(body.str()).substr(0, 12);

    nlohmann::json header = {{"format", "termalign/catalog"},
                             {"config_hash", config.config_hash()},
                             {"inputs", input_hashes},
                             {"catalog_version", config.catalog_version},
                             {"catalog_ref", catalog_ref},
                             {"sources", catalog.sources},
                             {"terms", catalog.terms.size()},
                             {"parse_issues", issue_count}};
    detail::write_file(paths.catalog(), header.dump() + "\n" + body.str());
    std::cout << "catalog: " << catalog.terms.size() << " terms from " << catalog.sources.size()
              << " ontologies -> " << paths.catalog().string() << "\n";

    for (const CrosswalkInput& input : config.crosswalks) {
        std::ifstream in = detail::open_input(input.path);
        CrosswalkResult result =
            parse_crosswalk(in, input.source_namespace, input.target_namespace, mode);
        for (const ParseIssue& issue : result.issues)
            std::cerr << input.path.string() << ":" << issue.line << ": " << issue.message
                      << "\n";
        std::ostringstream table;
        table << "source_id\ttarget_id\n";
        for (const auto& [src, dst] : result.table.edges) table << src << '\t' << dst << '\n';
        detail::write_file(paths.crosswalk(input), table.str());
        std::cout << "crosswalk " << input.source_namespace << "->" << input.target_namespace
                  << ": " << result.table.edges.size() << " edges, " << result.skipped_rows
                  << " rows skipped -> " << paths.crosswalk(input).string() << "\n";
    }
}

inline LoadedCatalog load_catalog_dump(const PipelinePaths& paths) {
    std::ifstream in = detail::open_input(paths.catalog());
    return read_catalog(in);
}

// --- corpus -----------------------------------------------------------------

inline void cmd_corpus(const PipelineConfig& config) {
    PipelinePaths paths = pipeline_paths(config);
    LoadedCatalog loaded = load_catalog_dump(paths);
    std::vector<TermDocument> docs = build_documents(loaded.catalog, config.synonym_scopes);

    nlohmann::json scopes = nlohmann::json::array();
    for (SynonymScope s : config.synonym_scopes) scopes.push_back(std::string(scope_to_string(s)));
    nlohmann::json header = {{"format", "termalign/corpus"},
                             {"config_hash", config.config_hash()},
                             {"catalog_ref", loaded.header.value("catalog_ref", "")},
                             {"synonym_scopes", scopes},
                             {"documents", docs.size()}};
    std::ostringstream out;
    write_corpus(out, docs, header);
    detail::write_file(paths.corpus(), out.str());
    std::cout << "corpus: " << docs.size() << " documents -> " << paths.corpus().string() << "\n";
}

// --- index ------------------------------------------------------------------

inline void cmd_index(const PipelineConfig& config) {
    PipelinePaths paths = pipeline_paths(config);
    std::ifstream in = detail::open_input(paths.corpus());
    LoadedCorpus corpus = read_corpus(in);
    if (corpus.docs.empty()) throw EmptyCorpus("corpus file has no documents");

    std::unique_ptr<EmbeddingProvider> provider = make_embedding_provider(config);
    std::vector<std::string> texts;
    texts.reserve(corpus.docs.size());
    for (const TermDocument& d : corpus.docs) texts.push_back(d.text);
    std::vector<Vector> vectors = embed_batch(*provider, texts, config.embedding.batch_size);

    VectorIndex index = build_index(corpus.docs, vectors,
                                    corpus.header.value("catalog_ref", ""), provider->id());
    std::ostringstream out;
    write_index(out, index, {{"config_hash", config.config_hash()}});
    detail::write_file(paths.index(), out.str());
    std::cout << "index: " << index.entries.size() << " vectors, dim " << index.dim << " -> "
              << paths.index().string() << "\n";
}

// --- generate ---------------------------------------------------------------

namespace detail {

// One generate_xref pass per configured crosswalk; pairs are folded with
// smallest-pivot dedup and diagnostics combined per code (no_pivot only when
// every crosswalk lacked the code).
inline XrefResult run_xref_generators(const PipelineConfig& config,
                                      const std::vector<SourceRecord>& records,
                                      const TermCatalog& catalog, const PipelinePaths& paths) {
    std::vector<XrefResult> results;
    for (const CrosswalkInput& input : config.crosswalks) {
        std::ifstream in = open_input(paths.crosswalk(input));
        CrosswalkResult parsed =
            parse_crosswalk(in, input.source_namespace, input.target_namespace);
        results.push_back(generate_xref(records, parsed.table, catalog, input.orientation));
    }
    if (results.size() == 1) return std::move(results.front());

    XrefResult combined;
    std::map<std::pair<std::string, std::string>, CandidatePair> by_key;
    std::map<std::string, XrefDiagRow> diag;
    for (const XrefResult& result : results) {
        for (const CandidatePair& pair : result.pairs) {
            auto key = std::make_pair(pair.source_key, pair.target_term_id);
            auto [it, inserted] = by_key.emplace(key, pair);
            if (!inserted && pair.pivot_id < it->second.pivot_id) it->second = pair;
        }
        for (const XrefDiagRow& row : result.diagnostics) {
            auto [it, inserted] = diag.emplace(row.code, row);
            if (inserted) continue;
            // a code matched by any crosswalk is not empty; no_xref wins
            // over no_pivot when any crosswalk had pivots
            if (row.reason == EmptyReason::None || it->second.reason == EmptyReason::None)
                it->second.reason = EmptyReason::None;
            else if (row.reason == EmptyReason::NoXref)
                it->second.reason = EmptyReason::NoXref;
        }
    }
    for (auto& [key, pair] : by_key) combined.pairs.push_back(std::move(pair));
    for (auto& [code, row] : diag) {
        row.n_pairs = 0;
        combined.diagnostics.push_back(row);
    }
    for (const CandidatePair& pair : combined.pairs)
        for (XrefDiagRow& row : combined.diagnostics)
            if (row.code == pair.source_key) ++row.n_pairs;
    return combined;
}

}  // namespace detail

inline void cmd_generate(const PipelineConfig& config, const std::string& generator) {
    if (generator != "rag" && generator != "xref" && generator != "both")
        throw ConfigInvalid("generator must be rag, xref or both, got '" + generator + "'");
    PipelinePaths paths = pipeline_paths(config);
    ParseMode mode = config.lenient ? ParseMode::Lenient : ParseMode::Strict;

    if (config.records.empty()) throw ConfigInvalid("no records file configured");
    std::ifstream records_in = detail::open_input(config.records);
    RecordsResult records = read_records(records_in, mode);
    for (const ParseIssue& issue : records.issues)
        std::cerr << config.records.string() << ":" << issue.line << ": " << issue.message
                  << "\n";

    LoadedCatalog loaded = load_catalog_dump(paths);
    std::string catalog_ref = loaded.header.value("catalog_ref", "");
    nlohmann::json base_header = {{"config_hash", config.config_hash()},
                                  {"catalog_ref", catalog_ref},
                                  {"records", records.records.size()},
                                  {"records_skipped", records.skipped_rows}};

    std::vector<CandidatePair> rag_pairs, xref_pairs;
    if (generator == "rag" || generator == "both") {
        std::ifstream index_in = detail::open_input(paths.index());
        VectorIndex index = read_index(index_in);
        std::unique_ptr<EmbeddingProvider> provider = make_embedding_provider(config);
        if (index.provider_id != provider->id())
            throw ConfigInvalid("index was embedded by '" + index.provider_id +
                                "' but the config selects '" + provider->id() + "'");
        RagOptions options;
        options.k = config.k;
        options.batch_size = config.embedding.batch_size;
        options.score_threshold = config.score_threshold;
        options.mode = mode;
        RagResult result =
            generate_rag(records.records, index, *provider, options, &loaded.catalog);
        rag_pairs = result.pairs;

        nlohmann::json header = base_header;
        header["format"] = "termalign/pairs";
        header["generator"] = "rag";
        header["k"] = config.k;
        header["provider_id"] = provider->id();
        header["skipped_records"] = result.skipped_records;
        std::ostringstream out;
        write_pairs(out, result.pairs, header);
        detail::write_file(paths.pairs_rag(), out.str());
        std::ostringstream diag;
        write_rag_diagnostics(diag, result.diagnostics);
        detail::write_file(paths.diag_rag(), diag.str());
        std::cout << "rag: " << result.pairs.size() << " pairs (" << result.skipped_records
                  << " records skipped) -> " << paths.pairs_rag().string() << "\n";
    }
    if (generator == "xref" || generator == "both") {
        if (config.crosswalks.empty()) throw ConfigInvalid("no crosswalks configured");
        XrefResult result =
            detail::run_xref_generators(config, records.records, loaded.catalog, paths);
        xref_pairs = result.pairs;

        nlohmann::json header = base_header;
        header["format"] = "termalign/pairs";
        header["generator"] = "xref";
        std::ostringstream out;
        write_pairs(out, result.pairs, header);
        detail::write_file(paths.pairs_xref(), out.str());
        std::ostringstream diag;
        write_xref_diagnostics(diag, result.diagnostics);
        detail::write_file(paths.diag_xref(), diag.str());
        std::size_t empty_codes = 0;
        for (const XrefDiagRow& row : result.diagnostics)
            if (row.n_pairs == 0) ++empty_codes;
        std::cout << "xref: " << result.pairs.size() << " pairs, " << empty_codes
                  << " empty codes -> " << paths.pairs_xref().string() << "\n";
    }
    if (generator == "both") {
        std::vector<CandidatePair> merged = merge_candidates({rag_pairs, xref_pairs});
        nlohmann::json header = base_header;
        header["format"] = "termalign/pairs";
        header["generator"] = "rag+xref";
        std::ostringstream out;
        write_pairs(out, merged, header);
        detail::write_file(paths.pairs_merged(), out.str());
        std::cout << "merged: " << merged.size() << " pairs -> " << paths.pairs_merged().string()
                  << "\n";
    }
}

// --- adjudicate -------------------------------------------------------------

inline void cmd_adjudicate(const PipelineConfig& config, std::filesystem::path pairs_path = {}) {
    PipelinePaths paths = pipeline_paths(config);
    if (pairs_path.empty()) {
        pairs_path = std::filesystem::exists(paths.pairs_merged()) ? paths.pairs_merged()
                                                                   : paths.pairs_rag();
    }
    std::ifstream in = detail::open_input(pairs_path);
    LoadedPairs loaded = read_pairs(in);
    const AcceptanceCriteria& criteria = builtin_criteria(config.criteria);

    std::unique_ptr<LlmProvider> provider = make_llm_provider(config);
    DecisionCache cache(paths.llm_cache());
    AdjudicateOptions options;
    options.verdict_retries = config.llm.retries;
    options.concurrency = config.llm.concurrency;
    std::vector<AdjudicationDecision> decisions =
        adjudicate_all(loaded.pairs, criteria, *provider, cache, options);

    std::size_t accepted = 0, rejected = 0, undecided = 0;
    for (const AdjudicationDecision& d : decisions) {
        if (d.verdict == Verdict::Accept) ++accepted;
        else if (d.verdict == Verdict::Reject) ++rejected;
        else ++undecided;
    }
    nlohmann::json header = {{"format", "termalign/decisions"},
                             {"config_hash", config.config_hash()},
                             {"pairs_file", pairs_path.filename().string()},
                             {"pairs_hash", detail::file_hash(pairs_path)},
                             {"model_id", provider->model_id()},
                             {"criteria", criteria.name},
                             {"temperature", config.llm.temperature},
                             {"decisions", decisions.size()}};
    std::ostringstream out;
    write_decisions(out, decisions, header);
    detail::write_file(paths.decisions(), out.str());
    std::cout << "adjudicated " << decisions.size() << " pairs: " << accepted << " accepted, "
              << rejected << " rejected, " << undecided << " undecided -> "
              << paths.decisions().string() << "\n";
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateOptions {
    std::filesystem::path decisions_path;   // default: <out>/decisions.jsonl
    std::filesystem::path human_csv;        // optional verdict-pair file
    std::filesystem::path report_path;      // default: <out>/report.json
    std::optional<std::size_t> sample_size; // export an audit sample
    std::uint64_t seed = 0;                 // audit sampling seed
};

namespace detail {

inline std::optional<LoadedPairs> try_load_pairs(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return std::nullopt;
    std::ifstream in = open_input(path);
    return read_pairs(in);
}

inline std::vector<CandidatePair> accepted_only(const std::vector<CandidatePair>& pairs,
                                                const std::vector<AdjudicationDecision>& decisions) {
    std::set<std::string> accepted;
    for (const AdjudicationDecision& d : decisions)
        if (d.verdict == Verdict::Accept) accepted.insert(d.pair_key());
    std::vector<CandidatePair> out;
    for (const CandidatePair& p : pairs)
        if (accepted.count(p.pair_key())) out.push_back(p);
    return out;
}

}  // namespace detail

inline nlohmann::json cmd_evaluate(const PipelineConfig& config,
                                   const EvaluateOptions& options = {}) {
    PipelinePaths paths = pipeline_paths(config);
    std::filesystem::path decisions_path =
        options.decisions_path.empty() ? paths.decisions() : options.decisions_path;
    std::ifstream in = detail::open_input(decisions_path);
    LoadedDecisions loaded = read_decisions(in);

    auto rag = detail::try_load_pairs(paths.pairs_rag());
    auto xref = detail::try_load_pairs(paths.pairs_xref());
    auto merged = detail::try_load_pairs(paths.pairs_merged());

    nlohmann::json report;
    report["meta"] = {{"config_hash", config.config_hash()},
                      {"model_id", loaded.header.value("model_id", "")},
                      {"criteria", loaded.header.value("criteria", "")},
                      {"catalog_version", config.catalog_version},
                      {"k", config.k},
                      {"decisions_file", decisions_path.filename().string()},
                      {"post_adjudication_distribution", config.report.post_adjudication}};

    // agreement statistics from an expert-annotated verdict file
    if (!options.human_csv.empty()) {
        std::ifstream human_in = detail::open_input(options.human_csv);
        std::vector<VerdictPairRecord> verdicts = read_verdict_csv(human_in);
        report["confusion"] = confusion_section(confusion(verdicts));
    } else {
        report["confusion"] = nullptr;
    }

    // acceptance rates, overall and per generator
    std::map<std::string, std::set<Generator>> generators_by_key;
    auto note_generators = [&](const std::optional<LoadedPairs>& pairs) {
        if (!pairs) return;
        for (const CandidatePair& p : pairs->pairs)
            generators_by_key[p.pair_key()].insert(p.generators.begin(), p.generators.end());
    };
    note_generators(rag);
    note_generators(xref);
    note_generators(merged);

    report["acceptance"] = {{"overall", acceptance_section(loaded.decisions)}};
    for (Generator g : {Generator::Rag, Generator::Xref}) {
        std::vector<AdjudicationDecision> subset;
        for (const AdjudicationDecision& d : loaded.decisions) {
            auto it = generators_by_key.find(d.pair_key());
            if (it != generators_by_key.end() && it->second.count(g)) subset.push_back(d);
        }
        std::string key(generator_to_string(g));
        report["acceptance"]["by_generator"][key] =
            subset.empty() ? nlohmann::json(nullptr) : acceptance_section(subset);
    }

    // fan-out distribution and generator overlap, pre-adjudication by default
    auto distribution_for = [&](const std::optional<LoadedPairs>& pairs) -> nlohmann::json {
        if (!pairs) return nullptr;
        std::vector<CandidatePair> set = pairs->pairs;
        if (config.report.post_adjudication)
            set = detail::accepted_only(set, loaded.decisions);
        return distribution_section(match_distribution(set), config.report.at_most_n,
                                    config.report.top_m);
    };
    report["distribution"] = {{"rag", distribution_for(rag)},
                              {"xref", distribution_for(xref)},
                              {"merged", distribution_for(merged)}};
    if (rag && xref)
        report["overlap"] = overlap_section(generator_overlap(rag->pairs, xref->pairs));
    else
        report["overlap"] = nullptr;

    // deterministic audit sample for expert review
    if (options.sample_size) {
        std::vector<const AdjudicationDecision*> pool;
        for (const AdjudicationDecision& d : loaded.decisions) pool.push_back(&d);
        std::sort(pool.begin(), pool.end(),
                  [](const AdjudicationDecision* a, const AdjudicationDecision* b) {
                      return a->pair_key() < b->pair_key();
                  });
        std::mt19937_64 rng(options.seed);
        for (std::size_t i = pool.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(pool[i - 1], pool[pick(rng)]);
        }
        std::size_t take = std::min(*options.sample_size, pool.size());
        std::vector<const AdjudicationDecision*> sample(pool.begin(), pool.begin() + take);
        std::sort(sample.begin(), sample.end(),
                  [](const AdjudicationDecision* a, const AdjudicationDecision* b) {
                      return a->pair_key() < b->pair_key();
                  });
        std::ostringstream out;
        write_csv_row(out, {"pair_key", "human_verdict", "llm_verdict"});
        for (const AdjudicationDecision* d : sample)
            write_csv_row(out, {d->pair_key(), "",
                                d->verdict == Verdict::Accept   ? "yes"
                                : d->verdict == Verdict::Reject ? "no"
                                                                : ""});
        detail::write_file(paths.audit_sample(), out.str());
        report["meta"]["audit_sample"] = {{"size", take}, {"seed", options.seed}};
        std::cout << "audit sample: " << take << " pairs -> " << paths.audit_sample().string()
                  << "\n";
    }

    std::filesystem::path report_path =
        options.report_path.empty() ? paths.report() : options.report_path;
    detail::write_file(report_path, report.dump(2) + "\n");

    // plain-text summary
    std::cout << "report -> " << report_path.string() << "\n";
    const nlohmann::json& overall = report["acceptance"]["overall"];
    std::cout << "  decisions: " << overall["accepted"].get<std::uint64_t>() << " accepted, "
              << overall["rejected"].get<std::uint64_t>() << " rejected, "
              << overall["undecided"].get<std::uint64_t>() << " undecided\n";
    if (!overall["rate"].is_null())
        std::cout << "  acceptance rate: " << overall["rate"]["display_percent"].get<int>()
                  << "%\n";
    if (!report["confusion"].is_null()) {
        const nlohmann::json& c = report["confusion"];
        std::cout << "  human-vs-llm: yes-yes " << c["yes_yes"].get<std::uint64_t>() << ", no-no "
                  << c["no_no"].get<std::uint64_t>() << ", no-yes "
                  << c["no_yes"].get<std::uint64_t>() << ", yes-no "
                  << c["yes_no"].get<std::uint64_t>() << " (agreement "
                  << c["agreement"]["display_percent"].get<int>() << "%)\n";
    }
    return report;
}

}  // namespace termalign
