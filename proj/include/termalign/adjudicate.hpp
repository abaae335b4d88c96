#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "termalign/candidates.hpp"
#include "termalign/errors.hpp"
#include "termalign/hash.hpp"
#include "termalign/text.hpp"

namespace termalign {

struct AcceptanceCriteria {
    std::string name;
    std::string criteria_text;
};

// Built-in rule sets. "strict-generalization" accepts only equivalent or
// broader targets; "relaxed-relatedness" also accepts related narrower ones.
inline const AcceptanceCriteria& builtin_criteria(std::string_view name) {
    static const AcceptanceCriteria strict{
        "strict-generalization",
        "Given two short descriptions, decide whether they refer to the same disease or "
        "medical condition. If the second description is more narrow or specific, choose "
        "\"No\" as an answer. If the second description is broader or more generic, choose "
        "\"Yes\" as an answer. Start your answer from \"Y\" for \"yes\" or \"N\" for \"no\" "
        "and provide a concise justification, no more than 30 words, why you came to this "
        "conclusion."};
    static const AcceptanceCriteria relaxed{
        "relaxed-relatedness",
        "Given two short descriptions, decide whether they refer to the same disease or "
        "medical condition, or to related conditions where one is a more general or more "
        "specific form of the other. If they do, choose \"Yes\" as an answer; otherwise "
        "choose \"No\". Start your answer from \"Y\" for \"yes\" or \"N\" for \"no\" and "
        "provide a concise justification, no more than 30 words, why you came to this "
        "conclusion."};
    if (name == strict.name) return strict;
    if (name == relaxed.name) return relaxed;
    throw ConfigInvalid("unknown acceptance criteria: '" + std::string(name) + "'");
}

// Description 1 is always the input record and Description 2 the ontology
// term; the narrow/broad rule in the criteria presumes the target second.
inline std::string render_prompt(const AcceptanceCriteria& criteria, const CandidatePair& pair) {
    if (pair.source_text.empty())
        throw EmptyField("pair '" + pair.pair_key() + "' has no source text");
    if (pair.target_label.empty())
        throw EmptyField("pair '" + pair.pair_key() + "' has no target label");
    return criteria.criteria_text + "\n\nDescription 1: " + pair.source_text +
           "\nDescription 2: " + pair.target_label;
}

enum class Verdict { Accept, Reject, Undecided };

inline std::string_view verdict_to_string(Verdict v) {
    switch (v) {
        case Verdict::Accept: return "ACCEPT";
        case Verdict::Reject: return "REJECT";
        default: return "UNDECIDED";
    }
}

inline Verdict verdict_from_string(std::string_view s) {
    if (s == "ACCEPT") return Verdict::Accept;
    if (s == "REJECT") return Verdict::Reject;
    if (s == "UNDECIDED") return Verdict::Undecided;
    throw Error("unknown verdict: '" + std::string(s) + "'");
}

struct ParsedVerdict {
    Verdict verdict = Verdict::Undecided;
    std::string justification;
};

// The first alphabetic character decides, case-insensitively: Y accepts,
// N rejects, anything else (or no alphabetic character at all) is
// unparseable. The justification is the remainder after the verdict word and
// one run of separating whitespace/punctuation ("Y — because..." and
// "No, because..." both strip cleanly).
inline ParsedVerdict parse_verdict(std::string_view raw) {
    std::size_t i = 0;
    auto is_alpha = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    };
    while (i < raw.size() && !is_alpha(raw[i])) ++i;
    if (i == raw.size()) throw UnparseableVerdict("no alphabetic verdict character");

    char lead = raw[i];
    if (lead >= 'A' && lead <= 'Z') lead = static_cast<char>(lead - 'A' + 'a');
    ParsedVerdict out;
    if (lead == 'y') out.verdict = Verdict::Accept;
    else if (lead == 'n') out.verdict = Verdict::Reject;
    else throw UnparseableVerdict("leading character '" + std::string(1, raw[i]) + "' is not Y or N");

    while (i < raw.size() && is_alpha(raw[i])) ++i;   // rest of the verdict word
    while (i < raw.size()) {
        char c = raw[i];
        if (is_ascii_space(c) || c == ',' || c == '.' || c == ':' || c == ';' || c == '!' ||
            c == '?' || c == '-') {
            ++i;
        } else if (raw.compare(i, 3, "\xE2\x80\x93") == 0 ||
                   raw.compare(i, 3, "\xE2\x80\x94") == 0) {
            i += 3;   // en/em dash
        } else {
            break;
        }
    }
    out.justification = std::string(raw.substr(i));
    return out;
}

inline std::string now_utc_iso8601() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct AdjudicationDecision {
    std::string source_key;
    std::string target_term_id;
    Verdict verdict = Verdict::Undecided;
    std::string justification;
    std::string raw_response;
    std::string model_id;
    std::string criteria_name;
    std::string prompt_hash;
    std::string timestamp;

    std::string pair_key() const { return source_key + "|" + target_term_id; }
};

class LlmProvider {
  public:
    virtual ~LlmProvider() = default;
    virtual std::string model_id() const = 0;
    virtual std::string complete(const std::string& prompt) = 0;
};

// Scripted offline provider: answers by the first substring rule that
// matches the prompt, or replays a fixed response sequence. Thread-safe;
// counts completions so tests can assert "zero provider calls".
class MockLlmProvider final : public LlmProvider {
  public:
    struct Rule {
        std::string contains;
        std::string response;
    };

    MockLlmProvider(std::string model, std::vector<Rule> rules, std::string default_response)
        : model_(std::move(model)), rules_(std::move(rules)),
          default_(std::move(default_response)) {}

    MockLlmProvider(std::string model, std::vector<std::string> sequence)
        : model_(std::move(model)), sequence_(std::move(sequence)), sequential_(true) {}

    // {"rules":[{"contains":..,"response":..},...],"default":...} or
    // {"sequence":[...]}.
    static std::unique_ptr<MockLlmProvider> from_json(const nlohmann::json& j,
                                                      std::string model = "mock") {
        if (j.contains("sequence"))
            return std::make_unique<MockLlmProvider>(
                std::move(model), j.at("sequence").get<std::vector<std::string>>());
        std::vector<Rule> rules;
        for (const auto& r : j.value("rules", nlohmann::json::array()))
            rules.push_back({r.at("contains").get<std::string>(),
                             r.at("response").get<std::string>()});
        return std::make_unique<MockLlmProvider>(std::move(model), std::move(rules),
                                                 j.value("default", "N - no scripted response."));
    }

    std::string model_id() const override { return model_; }

    std::string complete(const std::string& prompt) override {
        calls_.fetch_add(1);
        if (sequential_) {
            std::lock_guard lock(mutex_);
            if (cursor_ >= sequence_.size())
                throw ProviderError("mock sequence exhausted after " +
                                    std::to_string(sequence_.size()) + " responses");
            return sequence_[cursor_++];
        }
        for (const Rule& rule : rules_)
            if (prompt.find(rule.contains) != std::string::npos) return rule.response;
        return default_;
    }

    std::size_t calls() const { return calls_.load(); }

  private:
    std::string model_;
    std::vector<Rule> rules_;
    std::string default_;
    std::vector<std::string> sequence_;
    bool sequential_ = false;
    std::size_t cursor_ = 0;
    std::mutex mutex_;
    std::atomic<std::size_t> calls_{0};
};

// Key-value store of raw responses keyed by (model_id, prompt_hash), so a
// criteria change invalidates cached verdicts. Optionally backed by an
// append-only JSONL file; concurrent readers, serialized writers.
class DecisionCache {
  public:
    struct Entry {
        std::string raw_response;
        std::string timestamp;
    };

    DecisionCache() = default;

    explicit DecisionCache(const std::filesystem::path& path) : path_(path) {
        if (std::filesystem::exists(path)) {
            std::ifstream in(path);
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (trim(line).empty()) continue;
                nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
                if (j.is_discarded() || !j.contains("model_id") || !j.contains("prompt_hash") ||
                    !j.contains("raw_response") || !j.contains("timestamp"))
                    throw CacheCorruption("cache line " + std::to_string(line_no) +
                                          " is not a valid entry: " + path.string());
                entries_[{j["model_id"].get<std::string>(), j["prompt_hash"].get<std::string>()}] =
                    {j["raw_response"].get<std::string>(), j["timestamp"].get<std::string>()};
            }
        }
        out_.open(path, std::ios::app);
        if (!out_) throw Error("cannot open cache file for append: " + path.string());
    }

    std::optional<Entry> get(const std::string& model_id, const std::string& prompt_hash) const {
        std::shared_lock lock(mutex_);
        auto it = entries_.find({model_id, prompt_hash});
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void put(const std::string& model_id, const std::string& prompt_hash, const std::string& raw,
             const std::string& timestamp) {
        std::unique_lock lock(mutex_);
        auto [it, inserted] = entries_.emplace(std::make_pair(model_id, prompt_hash),
                                               Entry{raw, timestamp});
        if (!inserted || !out_.is_open()) return;
        nlohmann::json j = {{"model_id", model_id},
                            {"prompt_hash", prompt_hash},
                            {"raw_response", raw},
                            {"timestamp", timestamp}};
        out_ << j.dump() << '\n';
        out_.flush();
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

  private:
    mutable std::shared_mutex mutex_;
    std::map<std::pair<std::string, std::string>, Entry> entries_;
    std::filesystem::path path_;
    std::ofstream out_;
};

struct AdjudicateOptions {
    int verdict_retries = 2;      // extra attempts after an unparseable response
    std::size_t concurrency = 4;  // bounded in-flight provider calls
};

namespace detail {

inline AdjudicationDecision adjudicate_one(const CandidatePair& pair,
                                           const AcceptanceCriteria& criteria, LlmProvider& llm,
                                           DecisionCache& cache, const AdjudicateOptions& opts) {
    std::string prompt = render_prompt(criteria, pair);
    AdjudicationDecision decision;
    decision.source_key = pair.source_key;
    decision.target_term_id = pair.target_term_id;
    decision.model_id = llm.model_id();
    decision.criteria_name = criteria.name;
    decision.prompt_hash = sha256_hex(prompt);

    std::string raw;
    std::string timestamp;
    bool have_raw = false;
    if (auto hit = cache.get(decision.model_id, decision.prompt_hash)) {
        raw = hit->raw_response;
        timestamp = hit->timestamp;
        have_raw = true;
    } else {
        bool parseable = false;
        for (int attempt = 0; attempt <= opts.verdict_retries && !parseable; ++attempt) {
            try {
                raw = llm.complete(prompt);
                have_raw = true;
            } catch (const ProviderError&) {
                break;   // transport already retried inside the provider
            }
            try {
                parse_verdict(raw);
                parseable = true;
            } catch (const UnparseableVerdict&) {
            }
        }
        timestamp = now_utc_iso8601();
        if (have_raw) cache.put(decision.model_id, decision.prompt_hash, raw, timestamp);
    }

    decision.raw_response = raw;
    decision.timestamp = timestamp;
    if (have_raw) {
        try {
            ParsedVerdict parsed = parse_verdict(raw);
            decision.verdict = parsed.verdict;
            decision.justification = parsed.justification;
        } catch (const UnparseableVerdict&) {
            decision.verdict = Verdict::Undecided;
        }
    }
    return decision;
}

}  // namespace detail

// One decision per pair, in input order. Cached (model_id, prompt_hash)
// responses are reused without calling the provider; fresh responses are
// persisted before being returned. Unparseable responses are retried up to
// the limit, then surface as UNDECIDED; provider failures also yield
// UNDECIDED but are not cached, so a later run retries them.
inline std::vector<AdjudicationDecision> adjudicate_all(const std::vector<CandidatePair>& pairs,
                                                        const AcceptanceCriteria& criteria,
                                                        LlmProvider& llm, DecisionCache& cache,
                                                        const AdjudicateOptions& opts = {}) {
    std::vector<AdjudicationDecision> decisions(pairs.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= pairs.size()) return;
            try {
                decisions[i] = detail::adjudicate_one(pairs[i], criteria, llm, cache, opts);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::size_t workers = std::max<std::size_t>(1, std::min(opts.concurrency, pairs.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t i = 0; i < workers; ++i) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return decisions;
}

// --- decision files -----------------------------------------------------------

inline nlohmann::json decision_to_json(const AdjudicationDecision& d) {
    return {{"pair_key", d.pair_key()},
            {"source_key", d.source_key},
            {"target_term_id", d.target_term_id},
            {"verdict", std::string(verdict_to_string(d.verdict))},
            {"justification", d.justification},
            {"raw_response", d.raw_response},
            {"model_id", d.model_id},
            {"criteria_name", d.criteria_name},
            {"prompt_hash", d.prompt_hash},
            {"timestamp", d.timestamp}};
}

inline AdjudicationDecision decision_from_json(const nlohmann::json& j) {
    AdjudicationDecision d;
    d.source_key = j.at("source_key").get<std::string>();
    d.target_term_id = j.at("target_term_id").get<std::string>();
    d.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    d.justification = j.at("justification").get<std::string>();
    d.raw_response = j.at("raw_response").get<std::string>();
    d.model_id = j.at("model_id").get<std::string>();
    d.criteria_name = j.at("criteria_name").get<std::string>();
    d.prompt_hash = j.at("prompt_hash").get<std::string>();
    d.timestamp = j.at("timestamp").get<std::string>();
    return d;
}

inline void write_decisions(std::ostream& out, const std::vector<AdjudicationDecision>& decisions,
                            const nlohmann::json& header) {
    out << header.dump() << '\n';
    for (const AdjudicationDecision& d : decisions) out << decision_to_json(d).dump() << '\n';
}

struct LoadedDecisions {
    std::vector<AdjudicationDecision> decisions;
    nlohmann::json header;
};

inline LoadedDecisions read_decisions(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MissingInput("decisions file is empty");
    LoadedDecisions loaded;
    loaded.header = nlohmann::json::parse(line);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        loaded.decisions.push_back(decision_from_json(nlohmann::json::parse(line)));
    }
    return loaded;
}

}  // namespace termalign
