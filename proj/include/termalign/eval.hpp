#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "termalign/adjudicate.hpp"
#include "termalign/candidates.hpp"
#include "termalign/csv.hpp"
#include "termalign/errors.hpp"
#include "termalign/text.hpp"

namespace termalign {

struct VerdictPairRecord {
    std::string pair_key;
    bool human_accept = false;
    bool llm_accept = false;
};

// CSV with header `pair_key,human_verdict,llm_verdict`; verdicts are yes/no,
// case-insensitive.
inline std::vector<VerdictPairRecord> read_verdict_csv(std::istream& in) {
    std::vector<std::string> row;
    if (!read_csv_row(in, row)) throw MissingInput("verdict stream is empty");
    std::vector<std::string> got;
    for (const std::string& c : row) got.push_back(to_lower(trim(c)));
    if (got != std::vector<std::string>{"pair_key", "human_verdict", "llm_verdict"})
        throw HeaderMismatch("verdict header must be 'pair_key,human_verdict,llm_verdict'");

    auto to_bool = [](const std::string& cell, std::size_t line) {
        std::string v = to_lower(trim(cell));
        if (v == "yes" || v == "y") return true;
        if (v == "no" || v == "n") return false;
        throw Error("verdict line " + std::to_string(line) + ": expected yes/no, got '" + cell +
                    "'");
    };

    std::vector<VerdictPairRecord> records;
    std::size_t line = 1;
    while (read_csv_row(in, row)) {
        ++line;
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        if (row.size() != 3)
            throw Error("verdict line " + std::to_string(line) + ": expected 3 cells");
        records.push_back({trim(row[0]), to_bool(row[1], line), to_bool(row[2], line)});
    }
    return records;
}

// Human-vs-LLM verdict counts; first token human, second LLM.
struct ConfusionMatrix {
    std::uint64_t yes_yes = 0;
    std::uint64_t no_no = 0;
    std::uint64_t no_yes = 0;   // human no, LLM yes
    std::uint64_t yes_no = 0;   // human yes, LLM no

    std::uint64_t total() const { return yes_yes + no_no + no_yes + yes_no; }
};

inline ConfusionMatrix confusion(const std::vector<VerdictPairRecord>& records) {
    ConfusionMatrix m;
    std::set<std::string> seen;
    for (const VerdictPairRecord& r : records) {
        if (!seen.insert(r.pair_key).second)
            throw DuplicatePairKey("duplicate pair key: '" + r.pair_key + "'");
        if (r.human_accept && r.llm_accept) ++m.yes_yes;
        else if (!r.human_accept && !r.llm_accept) ++m.no_no;
        else if (!r.human_accept && r.llm_accept) ++m.no_yes;
        else ++m.yes_no;
    }
    return m;
}

inline double agreement(const ConfusionMatrix& m) {
    if (m.total() == 0) throw EmptyMatrix("agreement of an empty matrix");
    return static_cast<double>(m.yes_yes + m.no_no) / static_cast<double>(m.total());
}

// Round half up to a whole percent, the convention used for displayed
// figures; the raw fraction is always reported alongside.
inline int display_percent(double fraction) {
    return static_cast<int>(std::floor(fraction * 100.0 + 0.5));
}

struct EvalMetrics {
    double agreement = 0.0;
    std::optional<double> precision;                // accepts: yy / (yy + ny)
    std::optional<double> recall_candidate_level;   // yy / (yy + yn)
    double acceptance_rate_llm = 0.0;
    double acceptance_rate_human = 0.0;
};

// Precision treats the human verdict as truth and LLM ACCEPT as the positive
// class. Ratios with a zero denominator are absent, never reported as 0.
inline EvalMetrics metrics(const ConfusionMatrix& m) {
    if (m.total() == 0) throw EmptyMatrix("metrics of an empty matrix");
    EvalMetrics out;
    out.agreement = agreement(m);
    std::uint64_t predicted_positive = m.yes_yes + m.no_yes;
    std::uint64_t actual_positive = m.yes_yes + m.yes_no;
    if (predicted_positive > 0)
        out.precision = static_cast<double>(m.yes_yes) / static_cast<double>(predicted_positive);
    if (actual_positive > 0)
        out.recall_candidate_level =
            static_cast<double>(m.yes_yes) / static_cast<double>(actual_positive);
    out.acceptance_rate_llm =
        static_cast<double>(predicted_positive) / static_cast<double>(m.total());
    out.acceptance_rate_human =
        static_cast<double>(actual_positive) / static_cast<double>(m.total());
    return out;
}

struct AcceptanceSummary {
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::uint64_t undecided = 0;   // excluded from the rate denominator
    double rate = 0.0;
};

inline AcceptanceSummary acceptance_rate(const std::vector<AdjudicationDecision>& decisions) {
    AcceptanceSummary s;
    for (const AdjudicationDecision& d : decisions) {
        if (d.verdict == Verdict::Accept) ++s.accepted;
        else if (d.verdict == Verdict::Reject) ++s.rejected;
        else ++s.undecided;
    }
    if (s.accepted + s.rejected == 0) throw NoDecidedPairs("no decided pairs");
    s.rate = static_cast<double>(s.accepted) / static_cast<double>(s.accepted + s.rejected);
    return s;
}

// --- fan-out distribution -----------------------------------------------------

struct MatchDistribution {
    std::map<std::string, std::uint64_t> per_source;    // source_key -> pair count
    std::map<std::uint64_t, std::uint64_t> histogram;   // pair count -> n sources
    std::uint64_t max_count = 0;
};

inline MatchDistribution match_distribution(const std::vector<CandidatePair>& pairs) {
    MatchDistribution d;
    for (const CandidatePair& p : pairs) ++d.per_source[p.source_key];
    for (const auto& [source, count] : d.per_source) {
        ++d.histogram[count];
        d.max_count = std::max(d.max_count, count);
    }
    return d;
}

inline double fraction_with_count_at_most(const MatchDistribution& d, std::uint64_t n) {
    if (d.per_source.empty()) return 0.0;
    std::uint64_t within = 0;
    for (const auto& [count, sources] : d.histogram)
        if (count <= n) within += sources;
    return static_cast<double>(within) / static_cast<double>(d.per_source.size());
}

// Top-m sources by pair count, ties broken by source key.
inline std::vector<std::pair<std::string, std::uint64_t>> top_sources(const MatchDistribution& d,
                                                                      std::size_t m) {
    std::vector<std::pair<std::string, std::uint64_t>> all(d.per_source.begin(),
                                                           d.per_source.end());
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (all.size() > m) all.resize(m);
    return all;
}

// --- generator overlap ----------------------------------------------------------

struct OverlapSummary {
    std::uint64_t sources_with_intersection = 0;   // shared sources with a common target
    std::uint64_t shared_sources = 0;
    std::uint64_t only_in_a = 0;
    std::uint64_t only_in_b = 0;
    std::map<std::string, std::uint64_t> intersection_sizes;   // shared sources only
};

inline OverlapSummary generator_overlap(const std::vector<CandidatePair>& a,
                                        const std::vector<CandidatePair>& b) {
    std::map<std::string, std::set<std::string>> targets_a, targets_b;
    for (const CandidatePair& p : a) targets_a[p.source_key].insert(p.target_term_id);
    for (const CandidatePair& p : b) targets_b[p.source_key].insert(p.target_term_id);

    OverlapSummary out;
    for (const auto& [source, ta] : targets_a) {
        auto it = targets_b.find(source);
        if (it == targets_b.end()) {
            ++out.only_in_a;
            continue;
        }
        ++out.shared_sources;
        std::uint64_t common = 0;
        for (const std::string& t : ta) common += it->second.count(t);
        out.intersection_sizes[source] = common;
        if (common > 0) ++out.sources_with_intersection;
    }
    for (const auto& [source, tb] : targets_b)
        if (!targets_a.count(source)) ++out.only_in_b;
    return out;
}

// --- report ------------------------------------------------------------------------

inline nlohmann::json fraction_json(double fraction) {
    return {{"fraction", fraction}, {"display_percent", display_percent(fraction)}};
}

inline nlohmann::json confusion_section(const ConfusionMatrix& m) {
    nlohmann::json j = {{"yes_yes", m.yes_yes},
                        {"no_no", m.no_no},
                        {"no_yes", m.no_yes},
                        {"yes_no", m.yes_no},
                        {"total", m.total()}};
    if (m.total() > 0) {
        EvalMetrics em = metrics(m);
        j["agreement"] = fraction_json(em.agreement);
        j["precision"] = em.precision ? fraction_json(*em.precision) : nlohmann::json(nullptr);
        j["recall_candidate_level"] = em.recall_candidate_level
                                          ? fraction_json(*em.recall_candidate_level)
                                          : nlohmann::json(nullptr);
        j["acceptance_rate_llm"] = fraction_json(em.acceptance_rate_llm);
        j["acceptance_rate_human"] = fraction_json(em.acceptance_rate_human);
    } else {
        j["agreement"] = nullptr;
        j["precision"] = nullptr;
        j["recall_candidate_level"] = nullptr;
        j["acceptance_rate_llm"] = nullptr;
        j["acceptance_rate_human"] = nullptr;
    }
    return j;
}

inline nlohmann::json acceptance_section(const std::vector<AdjudicationDecision>& decisions) {
    nlohmann::json j;
    std::uint64_t accepted = 0, rejected = 0, undecided = 0;
    for (const AdjudicationDecision& d : decisions) {
        if (d.verdict == Verdict::Accept) ++accepted;
        else if (d.verdict == Verdict::Reject) ++rejected;
        else ++undecided;
    }
    j["accepted"] = accepted;
    j["rejected"] = rejected;
    j["undecided"] = undecided;
    j["rate"] = (accepted + rejected) > 0
                    ? fraction_json(static_cast<double>(accepted) /
                                    static_cast<double>(accepted + rejected))
                    : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json distribution_section(const MatchDistribution& d, std::uint64_t at_most_n,
                                           std::size_t top_m) {
    nlohmann::json histogram = nlohmann::json::object();
    for (const auto& [count, sources] : d.histogram)
        histogram[std::to_string(count)] = sources;
    nlohmann::json top = nlohmann::json::array();
    for (const auto& [source, count] : top_sources(d, top_m))
        top.push_back({{"source", source}, {"count", count}});
    std::uint64_t total_pairs = 0;
    for (const auto& [source, count] : d.per_source) total_pairs += count;
    return {{"sources", d.per_source.size()},
            {"pairs", total_pairs},
            {"histogram", histogram},
            {"max_count", d.max_count},
            {"at_most_n", at_most_n},
            {"fraction_with_count_at_most_n",
             d.per_source.empty() ? nlohmann::json(nullptr)
                                  : nlohmann::json(fraction_with_count_at_most(d, at_most_n))},
            {"top_sources", top}};
}

inline nlohmann::json overlap_section(const OverlapSummary& o) {
    nlohmann::json sizes = nlohmann::json::object();
    for (const auto& [source, n] : o.intersection_sizes) sizes[source] = n;
    return {{"sources_with_intersection", o.sources_with_intersection},
            {"shared_sources", o.shared_sources},
            {"only_in_a", o.only_in_a},
            {"only_in_b", o.only_in_b},
            {"intersection_sizes", sizes}};
}

}  // namespace termalign
