#pragma once

#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "termalign/errors.hpp"
#include "termalign/ontology.hpp"
#include "termalign/text.hpp"

namespace termalign {

enum class DocKind { Label, Synonym };

inline std::string_view kind_to_string(DocKind k) {
    return k == DocKind::Label ? "LABEL" : "SYNONYM";
}

inline DocKind kind_from_string(std::string_view s) {
    if (s == "LABEL") return DocKind::Label;
    if (s == "SYNONYM") return DocKind::Synonym;
    throw Error("unknown document kind: '" + std::string(s) + "'");
}

// One embeddable text unit; `doc_id` is "<term_id>#L" for the label and
// "<term_id>#S<n>" for the n-th entry of the sorted, de-duplicated synonym
// list.
struct TermDocument {
    std::string doc_id;
    std::string text;        // normalized
    std::string term_id;
    DocKind kind = DocKind::Label;
    std::string source;
};

// Flattens a catalog into label/synonym documents for non-obsolete terms.
// Pure function of (catalog, scopes): output order is (term id, kind, text)
// and identical across runs. Throws EmptyCorpus when nothing survives the
// scope filter and empty-text drop.
inline std::vector<TermDocument> build_documents(const TermCatalog& catalog,
                                                 const std::set<SynonymScope>& synonym_scopes) {
    std::vector<TermDocument> docs;
    for (const auto& [id, term] : catalog.terms) {
        if (term.obsolete) continue;
        std::string label = normalize_text(term.label);
        if (!label.empty())
            docs.push_back({id + "#L", std::move(label), id, DocKind::Label, term.source});

        std::set<std::string> texts;
        for (const Synonym& syn : term.synonyms) {
            if (!synonym_scopes.count(syn.scope)) continue;
            std::string text = normalize_text(syn.text);
            if (!text.empty()) texts.insert(std::move(text));
        }
        std::size_t n = 0;
        for (const std::string& text : texts)
            docs.push_back({id + "#S" + std::to_string(++n), text, id, DocKind::Synonym,
                            term.source});
    }
    if (docs.empty()) throw EmptyCorpus("no documents produced from catalog");
    return docs;
}

inline std::set<SynonymScope> all_synonym_scopes() {
    return {SynonymScope::Exact, SynonymScope::Broad, SynonymScope::Narrow,
            SynonymScope::Related, SynonymScope::Unspecified};
}

// --- line-delimited corpus files -------------------------------------------

inline void write_corpus(std::ostream& out, const std::vector<TermDocument>& docs,
                         const nlohmann::json& header) {
    out << header.dump() << '\n';
    for (const TermDocument& d : docs) {
        nlohmann::json j = {{"doc_id", d.doc_id},
                            {"text", d.text},
                            {"term_id", d.term_id},
                            {"kind", std::string(kind_to_string(d.kind))},
                            {"source", d.source}};
        out << j.dump() << '\n';
    }
}

struct LoadedCorpus {
    std::vector<TermDocument> docs;
    nlohmann::json header;
};

inline LoadedCorpus read_corpus(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MissingInput("corpus file is empty");
    LoadedCorpus loaded;
    loaded.header = nlohmann::json::parse(line);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        loaded.docs.push_back({j.at("doc_id").get<std::string>(), j.at("text").get<std::string>(),
                               j.at("term_id").get<std::string>(),
                               kind_from_string(j.at("kind").get<std::string>()),
                               j.at("source").get<std::string>()});
    }
    return loaded;
}

}  // namespace termalign
