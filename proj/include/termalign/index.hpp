#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "termalign/corpus.hpp"
#include "termalign/embedding.hpp"
#include "termalign/errors.hpp"
#include "termalign/text.hpp"

namespace termalign {

struct IndexEntry {
    std::string doc_id;
    std::string term_id;
    Vector vec;          // L2-normalized
};

// In-process exact-retrieval index. Immutable once built; concurrent
// searches are safe.
struct VectorIndex {
    std::size_t dim = 0;
    std::vector<IndexEntry> entries;
    std::string catalog_ref;
    std::string provider_id;
};

inline VectorIndex build_index(const std::vector<TermDocument>& docs,
                               const std::vector<Vector>& vectors,
                               std::string catalog_ref = "", std::string provider_id = "") {
    if (docs.size() != vectors.size())
        throw LengthMismatch("build_index: " + std::to_string(docs.size()) + " docs vs " +
                             std::to_string(vectors.size()) + " vectors");
    if (docs.empty()) throw LengthMismatch("build_index: empty input");

    VectorIndex index;
    index.dim = vectors.front().size();
    index.catalog_ref = std::move(catalog_ref);
    index.provider_id = std::move(provider_id);
    index.entries.reserve(docs.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (vectors[i].size() != index.dim)
            throw DimensionMismatch("build_index: entry " + std::to_string(i) + " has dim " +
                                    std::to_string(vectors[i].size()) + ", expected " +
                                    std::to_string(index.dim));
        if (!seen.insert(docs[i].doc_id).second)
            throw Error("build_index: duplicate doc_id '" + docs[i].doc_id + "'");
        index.entries.push_back({docs[i].doc_id, docs[i].term_id, vectors[i]});
    }
    return index;
}

struct ScoredTerm {
    std::string term_id;
    std::string best_doc_id;
    double score = 0.0;      // max cosine over the term's documents
};

// Exact top-k retrieval: scores every document by dot product (cosine for
// normalized inputs), collapses documents to terms keeping the per-term
// maximum, sorts by (score desc, term_id asc) and truncates. The doc tie on
// equal scores goes to the lexicographically smallest doc_id, so results do
// not depend on entry order. Returns fewer than k terms when the corpus has
// fewer distinct terms.
inline std::vector<ScoredTerm> search(const VectorIndex& index, const Vector& query,
                                      std::size_t k) {
    if (query.size() != index.dim)
        throw DimensionMismatch("search: query dim " + std::to_string(query.size()) +
                                ", index dim " + std::to_string(index.dim));
    if (k == 0) throw Error("search: k must be positive");

    std::map<std::string, std::pair<double, std::string>> best;   // term -> (score, doc)
    for (const IndexEntry& e : index.entries) {
        double score = dot(query, e.vec);
        auto it = best.find(e.term_id);
        if (it == best.end()) {
            best.emplace(e.term_id, std::make_pair(score, e.doc_id));
        } else if (score > it->second.first ||
                   (score == it->second.first && e.doc_id < it->second.second)) {
            it->second = {score, e.doc_id};
        }
    }

    std::vector<ScoredTerm> scored;
    scored.reserve(best.size());
    for (const auto& [term_id, sd] : best) scored.push_back({term_id, sd.second, sd.first});
    std::sort(scored.begin(), scored.end(), [](const ScoredTerm& a, const ScoredTerm& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.term_id < b.term_id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

// --- index persistence -------------------------------------------------------
//
// First line: JSON header with dim, provider_id, catalog_ref and entry count.
// Then one entry per line: doc_id <TAB> term_id <TAB> dim <TAB> components
// (space-separated, shortest round-trip form).

inline void write_index(std::ostream& out, const VectorIndex& index,
                        nlohmann::json extra_header = {}) {
    nlohmann::json header = std::move(extra_header);
    header["format"] = "termalign/index";
    header["dim"] = index.dim;
    header["provider_id"] = index.provider_id;
    header["catalog_ref"] = index.catalog_ref;
    header["entries"] = index.entries.size();
    out << header.dump() << '\n';
    for (const IndexEntry& e : index.entries) {
        out << e.doc_id << '\t' << e.term_id << '\t' << e.vec.size() << '\t';
        for (std::size_t i = 0; i < e.vec.size(); ++i) {
            if (i) out.put(' ');
            out << format_double(e.vec[i]);
        }
        out.put('\n');
    }
}

inline VectorIndex read_index(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MissingInput("index file is empty");
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("format", "") != "termalign/index")
        throw MissingInput("not an index file");

    VectorIndex index;
    index.dim = header.at("dim").get<std::size_t>();
    index.provider_id = header.value("provider_id", "");
    index.catalog_ref = header.value("catalog_ref", "");
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split(line, '\t');
        if (cells.size() != 4) throw Error("malformed index entry: '" + line + "'");
        IndexEntry e;
        e.doc_id = cells[0];
        e.term_id = cells[1];
        std::size_t dim = parse_uint(cells[2]);
        for (const std::string& c : split(cells[3], ' '))
            if (!c.empty()) e.vec.push_back(parse_double(c));
        if (e.vec.size() != dim || dim != index.dim)
            throw DimensionMismatch("index entry '" + e.doc_id + "' has dim " +
                                    std::to_string(e.vec.size()) + ", expected " +
                                    std::to_string(index.dim));
        index.entries.push_back(std::move(e));
    }
    if (header.at("entries").get<std::size_t>() != index.entries.size())
        throw Error("index entry count does not match header");
    return index;
}

}  // namespace termalign
