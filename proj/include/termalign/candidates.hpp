#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "termalign/csv.hpp"
#include "termalign/embedding.hpp"
#include "termalign/errors.hpp"
#include "termalign/index.hpp"
#include "termalign/ontology.hpp"
#include "termalign/text.hpp"

namespace termalign {

// One row of the input dataset: free text, a source code, or both.
struct SourceRecord {
    std::string record_id;
    std::string text;
    std::string code;        // canonical namespaced id, may be empty
    std::string code_label;  // official label of `code`, may be empty
};

inline std::string record_query_text(const SourceRecord& r) {
    return !r.text.empty() ? r.text : r.code_label;
}

inline std::string record_source_key(const SourceRecord& r) {
    return !r.code.empty() ? r.code : normalize_text(r.text);
}

enum class Generator { Rag, Xref };

inline std::string_view generator_to_string(Generator g) {
    return g == Generator::Rag ? "RAG" : "XREF";
}

inline Generator generator_from_string(std::string_view s) {
    if (s == "RAG") return Generator::Rag;
    if (s == "XREF") return Generator::Xref;
    throw Error("unknown generator: '" + std::string(s) + "'");
}

inline std::string generators_to_string(const std::set<Generator>& gens) {
    std::string out;
    for (Generator g : gens) {
        if (!out.empty()) out.push_back(',');
        out += generator_to_string(g);
    }
    return out;
}

// One (source, target term) mapping hypothesis with generator provenance.
struct CandidatePair {
    std::string record_id;
    std::string source_key;              // code if present, else normalized text
    std::string source_text;             // display text used in prompts
    std::string target_term_id;
    std::string target_label;
    std::string matched_doc_id;          // retrieval path only
    std::optional<double> score;         // retrieval path only
    std::string pivot_id;                // cross-reference path only
    std::set<Generator> generators;

    std::string pair_key() const { return source_key + "|" + target_term_id; }
};

// --- input records -----------------------------------------------------------

struct RecordsResult {
    std::vector<SourceRecord> records;
    std::size_t skipped_rows = 0;
    std::vector<ParseIssue> issues;
};

// CSV with header `record_id,text,code,code_label`; empty cells allowed, but
// each row needs a record_id, at least one of text/code, and a fresh
// record_id. Bad rows throw in strict mode and are counted in lenient mode.
inline RecordsResult read_records(std::istream& in, ParseMode mode = ParseMode::Strict) {
    RecordsResult result;
    std::vector<std::string> row;
    std::size_t consumed = 0;
    if (!read_csv_row(in, row, consumed)) throw MissingInput("records stream is empty");
    std::vector<std::string> expect = {"record_id", "text", "code", "code_label"};
    std::vector<std::string> got;
    for (const std::string& c : row) got.push_back(to_lower(trim(c)));
    if (got != expect)
        throw HeaderMismatch("records header must be 'record_id,text,code,code_label'");

    std::set<std::string> seen_ids;
    std::size_t line_no = 1;
    while (read_csv_row(in, row, consumed)) {
        std::size_t at = line_no + 1;
        line_no += consumed;
        if (row.size() == 1 && trim(row[0]).empty()) continue;   // trailing blank line
        auto bad = [&](const std::string& msg) {
            if (mode == ParseMode::Strict)
                throw Error("records line " + std::to_string(at) + ": " + msg);
            result.issues.push_back({at, msg});
            ++result.skipped_rows;
        };
        if (row.size() != 4) {
            bad("expected 4 cells, got " + std::to_string(row.size()));
            continue;
        }
        SourceRecord rec;
        rec.record_id = trim(row[0]);
        rec.text = trim(row[1]);
        rec.code = trim(row[2]).empty() ? "" : normalize_id(row[2]);
        rec.code_label = trim(row[3]);
        if (rec.record_id.empty()) {
            bad("missing record_id");
            continue;
        }
        if (rec.text.empty() && rec.code.empty()) {
            bad("record '" + rec.record_id + "' has neither text nor code");
            continue;
        }
        if (!seen_ids.insert(rec.record_id).second) {
            bad("duplicate record_id '" + rec.record_id + "'");
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

inline void write_records(std::ostream& out, const std::vector<SourceRecord>& records) {
    write_csv_row(out, {"record_id", "text", "code", "code_label"});
    for (const SourceRecord& r : records)
        write_csv_row(out, {r.record_id, r.text, r.code, r.code_label});
}

// --- retrieval-based generator ------------------------------------------------

struct RagDiagRow {
    std::string record_id;
    std::size_t requested_k = 0;
    std::size_t n_pairs = 0;
    std::string status;       // "ok" | "no_query_text"
};

struct RagResult {
    std::vector<CandidatePair> pairs;
    std::vector<RagDiagRow> diagnostics;   // one row per input record, input order
    std::size_t skipped_records = 0;
};

struct RagOptions {
    std::size_t k = 3;
    std::size_t batch_size = 64;
    std::optional<double> score_threshold;   // off by default
    ParseMode mode = ParseMode::Strict;
};

// For each record, embeds its query text (text, else code_label) and takes
// the top-k distinct terms from the index. Records without query text throw
// NoQueryText in strict mode, otherwise are skipped and counted. The catalog,
// when given, fills target labels.
inline RagResult generate_rag(const std::vector<SourceRecord>& records, const VectorIndex& index,
                              EmbeddingProvider& provider, const RagOptions& options = {},
                              const TermCatalog* catalog = nullptr) {
    if (options.k == 0) throw Error("generate_rag: k must be positive");

    RagResult result;
    std::vector<std::string> queries;
    std::vector<std::size_t> query_record;     // index into records
    std::vector<std::size_t> query_diag;       // index into diagnostics
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::string q = normalize_text(record_query_text(records[i]));
        if (q.empty()) {
            if (options.mode == ParseMode::Strict)
                throw NoQueryText("record '" + records[i].record_id +
                                  "' has no query text (no text, no code_label)");
            result.diagnostics.push_back({records[i].record_id, options.k, 0, "no_query_text"});
            ++result.skipped_records;
            continue;
        }
        queries.push_back(std::move(q));
        query_record.push_back(i);
        query_diag.push_back(result.diagnostics.size());
        result.diagnostics.push_back({records[i].record_id, options.k, 0, "ok"});
    }

    std::vector<Vector> vectors = embed_batch(provider, queries, options.batch_size);

    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const SourceRecord& rec = records[query_record[qi]];
        std::vector<ScoredTerm> hits = search(index, vectors[qi], options.k);
        std::size_t kept = 0;
        for (const ScoredTerm& hit : hits) {
            if (options.score_threshold && hit.score < *options.score_threshold) continue;
            CandidatePair pair;
            pair.record_id = rec.record_id;
            pair.source_key = record_source_key(rec);
            pair.source_text = record_query_text(rec);
            pair.target_term_id = hit.term_id;
            pair.matched_doc_id = hit.best_doc_id;
            pair.score = hit.score;
            pair.generators = {Generator::Rag};
            if (catalog) {
                auto it = catalog->terms.find(hit.term_id);
                if (it != catalog->terms.end()) pair.target_label = it->second.label;
            }
            result.pairs.push_back(std::move(pair));
            ++kept;
        }
        result.diagnostics[query_diag[qi]].n_pairs = kept;
    }
    return result;
}

// --- cross-reference pivot generator -------------------------------------------

enum class EmptyReason { None, NoPivot, NoXref };

inline std::string_view empty_reason_to_string(EmptyReason r) {
    switch (r) {
        case EmptyReason::NoPivot: return "no_pivot";
        case EmptyReason::NoXref: return "no_xref";
        default: return "none";
    }
}

struct XrefDiagRow {
    std::string code;
    std::size_t n_pairs = 0;
    EmptyReason reason = EmptyReason::None;
};

struct XrefResult {
    std::vector<CandidatePair> pairs;
    std::vector<XrefDiagRow> diagnostics;   // one row per distinct code, sorted by code
};

// How the crosswalk columns relate to the records: PivotToSource means the
// file maps pivot ids (column 1) to record-code ids (column 2).
enum class XrefOrientation { PivotToSource, SourceToPivot };

// Joins record codes to catalog terms through a pivot vocabulary: code c
// pairs with every term t such that some pivot p links to c in the crosswalk
// and t cross-references p. Operates per distinct code (so per-code pair
// counts sum to the output size); the first record bearing a code supplies
// record_id and display text. A (code, term) pair reached through several
// pivots keeps the lexicographically smallest pivot_id. Per-code diagnostics
// separate codes absent from the crosswalk (no_pivot) from codes whose
// pivots no catalog term references (no_xref). Records without a code are
// not inputs to this generator and are ignored.
inline XrefResult generate_xref(const std::vector<SourceRecord>& records,
                                const XrefTable& crosswalk, const TermCatalog& catalog,
                                XrefOrientation orientation = XrefOrientation::PivotToSource) {
    std::map<std::string, std::set<std::string>> pivots_by_code;
    for (const auto& [a, b] : crosswalk.edges) {
        if (orientation == XrefOrientation::PivotToSource)
            pivots_by_code[b].insert(a);
        else
            pivots_by_code[a].insert(b);
    }

    XrefResult result;
    std::map<std::string, XrefDiagRow> diag;
    std::set<std::string> seen_codes;
    for (const SourceRecord& rec : records) {
        if (rec.code.empty() || !seen_codes.insert(rec.code).second) continue;

        std::map<std::string, std::string> target_pivot;   // term -> smallest pivot
        auto pit = pivots_by_code.find(rec.code);
        bool has_pivot = pit != pivots_by_code.end() && !pit->second.empty();
        if (has_pivot) {
            for (const std::string& pivot : pit->second) {
                auto xit = catalog.by_xref.find(pivot);
                if (xit == catalog.by_xref.end()) continue;
                for (const std::string& term_id : xit->second) {
                    auto [it, inserted] = target_pivot.emplace(term_id, pivot);
                    if (!inserted && pivot < it->second) it->second = pivot;
                }
            }
        }
        for (const auto& [term_id, pivot] : target_pivot) {
            CandidatePair pair;
            pair.record_id = rec.record_id;
            pair.source_key = rec.code;
            pair.source_text = record_query_text(rec);
            pair.target_term_id = term_id;
            pair.target_label = catalog.terms.at(term_id).label;
            pair.pivot_id = pivot;
            pair.generators = {Generator::Xref};
            result.pairs.push_back(std::move(pair));
        }

        XrefDiagRow row{rec.code, target_pivot.size(), EmptyReason::None};
        if (target_pivot.empty())
            row.reason = has_pivot ? EmptyReason::NoXref : EmptyReason::NoPivot;
        diag.emplace(rec.code, std::move(row));
    }
    for (auto& [code, row] : diag) result.diagnostics.push_back(std::move(row));
    return result;
}

// --- merge -----------------------------------------------------------------------

// Union of candidate sets keyed by (source_key, target_term_id): generator
// sets are unioned, the score comes from the retrieval member and pivot_id
// from the cross-reference member, record_id is the smallest among members.
// Output is sorted by (source_key, target_term_id); merging is idempotent.
inline std::vector<CandidatePair> merge_candidates(
    const std::vector<std::vector<CandidatePair>>& sets) {
    std::map<std::pair<std::string, std::string>, CandidatePair> merged;
    for (const auto& set : sets) {
        for (const CandidatePair& pair : set) {
            auto key = std::make_pair(pair.source_key, pair.target_term_id);
            auto it = merged.find(key);
            if (it == merged.end()) {
                merged.emplace(key, pair);
                continue;
            }
            CandidatePair& m = it->second;
            m.generators.insert(pair.generators.begin(), pair.generators.end());
            if (!m.score && pair.score) {
                m.score = pair.score;
                m.matched_doc_id = pair.matched_doc_id;
            }
            if (m.pivot_id.empty() && !pair.pivot_id.empty()) m.pivot_id = pair.pivot_id;
            if (!pair.pivot_id.empty() && !m.pivot_id.empty() && pair.pivot_id < m.pivot_id)
                m.pivot_id = pair.pivot_id;
            if (pair.record_id < m.record_id) {
                m.record_id = pair.record_id;
                if (!pair.source_text.empty()) m.source_text = pair.source_text;
            }
            if (m.source_text.empty()) m.source_text = pair.source_text;
            if (m.target_label.empty()) m.target_label = pair.target_label;
        }
    }
    std::vector<CandidatePair> out;
    out.reserve(merged.size());
    for (auto& [key, pair] : merged) out.push_back(std::move(pair));
    return out;
}

// --- pair and diagnostics files ---------------------------------------------------

inline nlohmann::json pair_to_json(const CandidatePair& p) {
    nlohmann::json j = {{"record_id", p.record_id},
                        {"source_key", p.source_key},
                        {"source_text", p.source_text},
                        {"target_term_id", p.target_term_id},
                        {"target_label", p.target_label},
                        {"matched_doc_id", p.matched_doc_id},
                        {"pivot_id", p.pivot_id},
                        {"generators", generators_to_string(p.generators)}};
    if (p.score)
        j["score"] = *p.score;
    else
        j["score"] = nullptr;
    return j;
}

inline CandidatePair pair_from_json(const nlohmann::json& j) {
    CandidatePair p;
    p.record_id = j.at("record_id").get<std::string>();
    p.source_key = j.at("source_key").get<std::string>();
    p.source_text = j.at("source_text").get<std::string>();
    p.target_term_id = j.at("target_term_id").get<std::string>();
    p.target_label = j.at("target_label").get<std::string>();
    p.matched_doc_id = j.at("matched_doc_id").get<std::string>();
    p.pivot_id = j.at("pivot_id").get<std::string>();
    if (!j.at("score").is_null()) p.score = j.at("score").get<double>();
    for (const std::string& g : split(j.at("generators").get<std::string>(), ','))
        if (!g.empty()) p.generators.insert(generator_from_string(g));
    return p;
}

inline void write_pairs(std::ostream& out, const std::vector<CandidatePair>& pairs,
                        const nlohmann::json& header) {
    out << header.dump() << '\n';
    for (const CandidatePair& p : pairs) out << pair_to_json(p).dump() << '\n';
}

struct LoadedPairs {
    std::vector<CandidatePair> pairs;
    nlohmann::json header;
};

inline LoadedPairs read_pairs(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MissingInput("pairs file is empty");
    LoadedPairs loaded;
    loaded.header = nlohmann::json::parse(line);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        loaded.pairs.push_back(pair_from_json(nlohmann::json::parse(line)));
    }
    return loaded;
}

inline void write_rag_diagnostics(std::ostream& out, const std::vector<RagDiagRow>& rows) {
    out << "record_id\trequested_k\tn_pairs\tstatus\n";
    for (const RagDiagRow& r : rows)
        out << r.record_id << '\t' << r.requested_k << '\t' << r.n_pairs << '\t' << r.status
            << '\n';
}

inline void write_xref_diagnostics(std::ostream& out, const std::vector<XrefDiagRow>& rows) {
    out << "code\tn_pairs\tempty_reason\n";
    for (const XrefDiagRow& r : rows)
        out << r.code << '\t' << r.n_pairs << '\t' << empty_reason_to_string(r.reason) << '\n';
}

}  // namespace termalign
