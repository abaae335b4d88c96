#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "termalign/errors.hpp"
#include "termalign/text.hpp"

namespace termalign {

enum class ParseMode { Strict, Lenient };

enum class SynonymScope { Exact, Broad, Narrow, Related, Unspecified };

inline std::string_view scope_to_string(SynonymScope s) {
    switch (s) {
        case SynonymScope::Exact: return "EXACT";
        case SynonymScope::Broad: return "BROAD";
        case SynonymScope::Narrow: return "NARROW";
        case SynonymScope::Related: return "RELATED";
        default: return "UNSPECIFIED";
    }
}

inline SynonymScope scope_from_string(std::string_view s) {
    if (s == "EXACT") return SynonymScope::Exact;
    if (s == "BROAD") return SynonymScope::Broad;
    if (s == "NARROW") return SynonymScope::Narrow;
    if (s == "RELATED") return SynonymScope::Related;
    if (s == "UNSPECIFIED") return SynonymScope::Unspecified;
    throw Error("unknown synonym scope: '" + std::string(s) + "'");
}

struct Synonym {
    std::string text;
    SynonymScope scope = SynonymScope::Unspecified;

    bool operator==(const Synonym&) const = default;
};

struct OntologyTerm {
    std::string id;                     // canonical "PREFIX:LOCALID"
    std::string label;
    std::vector<Synonym> synonyms;      // unique (normalized text, scope) pairs
    std::vector<std::string> xrefs;     // canonical ids
    std::string source;                 // ontology tag, e.g. "MONDO"
    bool obsolete = false;
};

struct ParseIssue {
    std::size_t line = 0;
    std::string message;
};

struct OboParseResult {
    std::vector<OntologyTerm> terms;    // stanza order
    std::vector<ParseIssue> issues;     // lenient mode only
};

namespace detail {

// Cuts an unescaped '!' comment; a '!' inside a quoted string or after a
// backslash is content.
inline std::string strip_obo_comment(const std::string& line) {
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '\\') {
            ++i;
            continue;
        }
        if (c == '"') in_quotes = !in_quotes;
        else if (c == '!' && !in_quotes) return line.substr(0, i);
    }
    return line;
}

// Parses `"text" [SCOPE] ...`; returns false when the quotes are unbalanced.
inline bool parse_quoted_synonym(std::string_view value, Synonym& out) {
    std::string v = trim(value);
    if (v.empty() || v[0] != '"') return false;
    std::string text;
    std::size_t i = 1;
    bool closed = false;
    for (; i < v.size(); ++i) {
        char c = v[i];
        if (c == '\\' && i + 1 < v.size()) {
            text.push_back(v[++i]);
        } else if (c == '"') {
            closed = true;
            ++i;
            break;
        } else {
            text.push_back(c);
        }
    }
    if (!closed) return false;
    out.text = text;
    out.scope = SynonymScope::Unspecified;
    std::vector<std::string> rest = split(trim(v.substr(i)), ' ');
    if (!rest.empty()) {
        const std::string& tok = rest.front();
        if (tok == "EXACT" || tok == "BROAD" || tok == "NARROW" || tok == "RELATED")
            out.scope = scope_from_string(tok);
    }
    return true;
}

}  // namespace detail

// Parses the OBO flat-file subset: [Term] stanzas with id/name/synonym/xref/
// is_obsolete tag lines. Everything else (header, other stanza types, unknown
// tags) is ignored. Strict mode throws MalformedStanza at the first defect;
// lenient mode records the issue, drops the offending stanza, and resumes at
// the next stanza header.
inline OboParseResult parse_obo(std::istream& in, std::string_view source_tag,
                                ParseMode mode = ParseMode::Strict) {
    OboParseResult result;

    struct Pending {
        bool active = false;
        bool bad = false;
        bool has_id = false;
        std::size_t start_line = 0;
        OntologyTerm term;
    } cur;

    auto fail = [&](const std::string& msg, std::size_t line) {
        if (mode == ParseMode::Strict) throw MalformedStanza(msg, line);
        result.issues.push_back({line, msg});
        cur.bad = true;
    };

    auto reject = [&](const std::string& msg, std::size_t line) {
        if (mode == ParseMode::Strict) throw MalformedStanza(msg, line);
        result.issues.push_back({line, msg});
    };

    auto finalize = [&] {
        if (!cur.active) return;
        Pending stanza = std::exchange(cur, Pending{});
        if (stanza.bad) return;
        if (!stanza.has_id) {
            reject("[Term] stanza without id", stanza.start_line);
            return;
        }
        if (!stanza.term.obsolete && stanza.term.label.empty()) {
            reject("non-obsolete term '" + stanza.term.id + "' without label", stanza.start_line);
            return;
        }
        // de-duplicate synonyms on (normalized text, scope)
        std::set<std::pair<std::string, SynonymScope>> seen;
        std::vector<Synonym> unique;
        for (const Synonym& s : stanza.term.synonyms)
            if (seen.insert({normalize_text(s.text), s.scope}).second) unique.push_back(s);
        stanza.term.synonyms = std::move(unique);
        result.terms.push_back(std::move(stanza.term));
    };

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string line = trim(detail::strip_obo_comment(raw));

        if (!line.empty() && line.front() == '[' && line.find(']') != std::string::npos) {
            finalize();
            if (line == "[Term]") {
                cur.active = true;
                cur.start_line = line_no;
                cur.term.source = std::string(source_tag);
            }
            continue;
        }
        if (!cur.active || cur.bad || line.empty()) continue;

        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string tag = trim(line.substr(0, colon));
        std::string value = trim(line.substr(colon + 1));

        if (tag == "id") {
            std::string id = normalize_id(value);
            auto [prefix, local] = split_id(id);
            if (!cur.has_id && !prefix.empty() && !local.empty()) {
                cur.term.id = id;
                cur.has_id = true;
            }
        } else if (tag == "name") {
            if (cur.term.label.empty()) cur.term.label = value;
        } else if (tag == "synonym") {
            Synonym syn;
            if (!detail::parse_quoted_synonym(value, syn))
                fail("synonym with unbalanced quotes", line_no);
            else
                cur.term.synonyms.push_back(std::move(syn));
        } else if (tag == "xref") {
            std::string token = value;
            auto sp = token.find_first_of(" \t");
            if (sp != std::string::npos) token = token.substr(0, sp);
            std::string id = normalize_id(token);
            auto [prefix, local] = split_id(id);
            if (!prefix.empty() && !local.empty()) {
                bool dup = false;
                for (const std::string& x : cur.term.xrefs) dup = dup || x == id;
                if (!dup) cur.term.xrefs.push_back(std::move(id));
            }
        } else if (tag == "is_obsolete") {
            if (value == "true") cur.term.obsolete = true;
        }
        // other tags ignored
    }
    finalize();
    return result;
}

// Cross-reference table between two vocabularies, set semantics on edges.
struct XrefTable {
    std::string source_namespace;
    std::string target_namespace;
    std::set<std::pair<std::string, std::string>> edges;
};

struct CrosswalkResult {
    XrefTable table;
    std::size_t skipped_rows = 0;       // rows with an empty cell
    std::vector<ParseIssue> issues;     // namespace violations (lenient)
};

// Two-column TSV with a one-line header. Rows with an empty cell are skipped
// and counted; ids are normalized; namespace prefixes are enforced (strict:
// NamespaceViolation, lenient: issue + row dropped).
inline CrosswalkResult parse_crosswalk(std::istream& in, std::string_view source_ns,
                                       std::string_view target_ns,
                                       ParseMode mode = ParseMode::Strict) {
    auto upper = [](std::string_view ns) {
        std::string out = trim(ns);
        for (char& c : out)
            if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
        return out;
    };
    CrosswalkResult result;
    result.table.source_namespace = upper(source_ns);
    result.table.target_namespace = upper(target_ns);

    std::string line;
    if (!std::getline(in, line)) throw HeaderMismatch("crosswalk stream is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split(line, '\t').size() < 2)
        throw HeaderMismatch("crosswalk header has fewer than 2 columns");

    const std::string src_prefix = result.table.source_namespace + ":";
    const std::string dst_prefix = result.table.target_namespace + ":";

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split(line, '\t');
        std::string src = cells.size() > 0 ? trim(cells[0]) : "";
        std::string dst = cells.size() > 1 ? trim(cells[1]) : "";
        if (src.empty() || dst.empty()) {
            ++result.skipped_rows;
            continue;
        }
        src = normalize_id(src);
        dst = normalize_id(dst);
        bool src_ok = src.rfind(src_prefix, 0) == 0 && src.size() > src_prefix.size();
        bool dst_ok = dst.rfind(dst_prefix, 0) == 0 && dst.size() > dst_prefix.size();
        if (!src_ok || !dst_ok) {
            std::string msg = "line " + std::to_string(line_no) + ": id '" +
                              (src_ok ? dst : src) + "' lacks declared namespace '" +
                              (src_ok ? result.table.target_namespace
                                      : result.table.source_namespace) + "'";
            if (mode == ParseMode::Strict) throw NamespaceViolation(msg);
            result.issues.push_back({line_no, msg});
            continue;
        }
        result.table.edges.insert({std::move(src), std::move(dst)});
    }
    return result;
}

// Merged term store with a reverse cross-reference index. Immutable once
// built; safe to share across threads.
struct TermCatalog {
    std::map<std::string, OntologyTerm> terms;
    std::map<std::string, std::set<std::string>> by_xref;   // non-obsolete terms only
    std::set<std::string> sources;

    bool empty() const { return terms.empty(); }
};

inline TermCatalog build_catalog(const std::vector<std::vector<OntologyTerm>>& ontologies) {
    TermCatalog catalog;
    for (const auto& terms : ontologies) {
        for (const OntologyTerm& term : terms) {
            auto [it, inserted] = catalog.terms.emplace(term.id, term);
            if (!inserted) throw DuplicateTermId("duplicate term id: " + term.id);
            catalog.sources.insert(term.source);
            if (!term.obsolete)
                for (const std::string& xref : term.xrefs)
                    catalog.by_xref[xref].insert(term.id);
        }
    }
    return catalog;
}

// --- line-delimited catalog dumps ----------------------------------------

inline nlohmann::json term_to_json(const OntologyTerm& term) {
    nlohmann::json syns = nlohmann::json::array();
    for (const Synonym& s : term.synonyms)
        syns.push_back({{"text", s.text}, {"scope", std::string(scope_to_string(s.scope))}});
    return {{"id", term.id},       {"label", term.label}, {"synonyms", syns},
            {"xrefs", term.xrefs}, {"source", term.source}, {"obsolete", term.obsolete}};
}

inline OntologyTerm term_from_json(const nlohmann::json& j) {
    OntologyTerm term;
    term.id = j.at("id").get<std::string>();
    term.label = j.at("label").get<std::string>();
    for (const auto& s : j.at("synonyms"))
        term.synonyms.push_back(
            {s.at("text").get<std::string>(), scope_from_string(s.at("scope").get<std::string>())});
    term.xrefs = j.at("xrefs").get<std::vector<std::string>>();
    term.source = j.at("source").get<std::string>();
    term.obsolete = j.at("obsolete").get<bool>();
    return term;
}

inline void write_catalog(std::ostream& out, const TermCatalog& catalog,
                          const nlohmann::json& header) {
    out << header.dump() << '\n';
    for (const auto& [id, term] : catalog.terms) out << term_to_json(term).dump() << '\n';
}

struct LoadedCatalog {
    TermCatalog catalog;
    nlohmann::json header;
};

inline LoadedCatalog read_catalog(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MissingInput("catalog dump is empty");
    LoadedCatalog loaded;
    loaded.header = nlohmann::json::parse(line);
    std::vector<OntologyTerm> terms;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        terms.push_back(term_from_json(nlohmann::json::parse(line)));
    }
    loaded.catalog = build_catalog({terms});
    return loaded;
}

}  // namespace termalign
