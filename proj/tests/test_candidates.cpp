#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "termalign/candidates.hpp"

using namespace termalign;

namespace {

TermCatalog pivot_catalog() {
    // by_xref: P:1 -> {M:1, M:2}, P:2 -> {M:2}
    OntologyTerm t1{"M:1", "term one", {}, {"P:1"}, "M", false};
    OntologyTerm t2{"M:2", "term two", {}, {"P:1", "P:2"}, "M", false};
    OntologyTerm t3{"M:3", "term three", {}, {}, "M", false};
    return build_catalog({{t1, t2, t3}});
}

XrefTable make_table(std::vector<std::pair<std::string, std::string>> edges) {
    XrefTable table;
    table.source_namespace = "P";
    table.target_namespace = "C";
    for (auto& e : edges) table.edges.insert(std::move(e));
    return table;
}

// Nested-loop join oracle, independent of by_xref: scans raw edges and raw
// term xref lists.
std::set<std::pair<std::string, std::string>> oracle_join(
    const std::vector<SourceRecord>& records, const XrefTable& crosswalk,
    const std::vector<OntologyTerm>& terms) {
    std::set<std::pair<std::string, std::string>> out;
    for (const SourceRecord& rec : records) {
        if (rec.code.empty()) continue;
        for (const auto& [pivot, code] : crosswalk.edges) {
            if (code != rec.code) continue;
            for (const OntologyTerm& term : terms) {
                if (term.obsolete) continue;
                for (const std::string& x : term.xrefs)
                    if (x == pivot) out.insert({rec.code, term.id});
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("read_records parses the four-column format") {
    std::istringstream in(
        "record_id,text,code,code_label\n"
        "r1,Neonatal death,,\n"
        "r2,,ICD10:Q87.8,Other specified congenital malformation syndromes\n"
        "r3,\"some, text\",ICD10:I21,myocardial infarction\n");
    auto result = read_records(in);
    REQUIRE(result.records.size() == 3);
    CHECK(result.records[0].text == "Neonatal death");
    CHECK(result.records[0].code.empty());
    CHECK(result.records[1].code == "ICD10:Q878");   // normalized
    CHECK(result.records[2].text == "some, text");
}

TEST_CASE("read_records validates rows") {
    std::istringstream bad_header("id,text\n");
    CHECK_THROWS_AS(read_records(bad_header), HeaderMismatch);

    std::string no_content = "record_id,text,code,code_label\nr1,,,\n";
    {
        std::istringstream in(no_content);
        CHECK_THROWS_AS(read_records(in), Error);
    }
    {
        std::istringstream in(no_content);
        auto result = read_records(in, ParseMode::Lenient);
        CHECK(result.records.empty());
        CHECK(result.skipped_rows == 1);
    }

    std::string dup = "record_id,text,code,code_label\nr1,a,,\nr1,b,,\n";
    {
        std::istringstream in(dup);
        CHECK_THROWS_AS(read_records(in), Error);
    }
}

TEST_CASE("generate_rag on an empty record list") {
    FallbackEmbedder provider(16, 1);
    std::vector<TermDocument> docs = {{"T:1#L", "alpha", "T:1", DocKind::Label, "T"}};
    VectorIndex index = build_index(docs, embed_batch(provider, {"alpha"}));
    auto result = generate_rag({}, index, provider);
    CHECK(result.pairs.empty());
    CHECK(result.diagnostics.empty());
}

TEST_CASE("generate_rag composes embed and search per record") {
    FallbackEmbedder provider(32, 9);
    std::vector<std::string> texts = {"neonatal death", "respiratory failure", "loose stools"};
    std::vector<TermDocument> docs;
    for (std::size_t i = 0; i < texts.size(); ++i)
        docs.push_back({"T:" + std::to_string(i) + "#L", texts[i], "T:" + std::to_string(i),
                        DocKind::Label, "T"});
    VectorIndex index = build_index(docs, embed_batch(provider, texts));

    std::vector<SourceRecord> records = {{"r1", "Neonatal  Death", "", ""},
                                         {"r2", "loose stool", "", ""}};
    RagOptions options;
    options.k = 2;
    auto result = generate_rag(records, index, provider, options);

    // oracle composition: search per record with the same query text
    std::size_t pair_at = 0;
    for (const SourceRecord& rec : records) {
        Vector q = embed_batch(provider, {normalize_text(rec.text)})[0];
        auto hits = search(index, q, options.k);
        for (const ScoredTerm& hit : hits) {
            REQUIRE(pair_at < result.pairs.size());
            const CandidatePair& pair = result.pairs[pair_at++];
            CHECK(pair.record_id == rec.record_id);
            CHECK(pair.source_key == normalize_text(rec.text));
            CHECK(pair.target_term_id == hit.term_id);
            CHECK(pair.matched_doc_id == hit.best_doc_id);
            REQUIRE(pair.score.has_value());
            CHECK(*pair.score == hit.score);
            CHECK(pair.generators == std::set<Generator>{Generator::Rag});
        }
    }
    CHECK(pair_at == result.pairs.size());
}

TEST_CASE("generate_rag respects the per-record bound and accounts shortfalls") {
    FallbackEmbedder provider(16, 2);
    // corpus with 2 distinct terms only
    std::vector<TermDocument> docs = {{"T:1#L", "aaa", "T:1", DocKind::Label, "T"},
                                      {"T:2#L", "bbb", "T:2", DocKind::Label, "T"}};
    VectorIndex index = build_index(docs, embed_batch(provider, {"aaa", "bbb"}));
    std::vector<SourceRecord> records = {{"r1", "aaa", "", ""}, {"r2", "ccc", "", ""}};
    RagOptions options;
    options.k = 3;
    auto result = generate_rag(records, index, provider, options);

    CHECK(result.pairs.size() <= options.k * records.size());
    std::size_t shortfall_from_diag = 0;
    for (const RagDiagRow& row : result.diagnostics) {
        CHECK(row.n_pairs <= row.requested_k);
        shortfall_from_diag += row.requested_k - row.n_pairs;
    }
    CHECK(options.k * records.size() - result.pairs.size() == shortfall_from_diag);
}

TEST_CASE("generate_rag without query text: strict throws, lenient skips") {
    FallbackEmbedder provider(16, 2);
    std::vector<TermDocument> docs = {{"T:1#L", "alpha", "T:1", DocKind::Label, "T"}};
    VectorIndex index = build_index(docs, embed_batch(provider, {"alpha"}));
    std::vector<SourceRecord> records = {{"r1", "", "ICD10:A01", ""}};   // code, no label

    CHECK_THROWS_AS(generate_rag(records, index, provider), NoQueryText);

    RagOptions lenient;
    lenient.mode = ParseMode::Lenient;
    auto result = generate_rag(records, index, provider, lenient);
    CHECK(result.pairs.empty());
    CHECK(result.skipped_records == 1);
    REQUIRE(result.diagnostics.size() == 1);
    CHECK(result.diagnostics[0].status == "no_query_text");
}

TEST_CASE("generate_xref with an empty crosswalk diagnoses every code as no_pivot") {
    std::vector<SourceRecord> records = {{"r1", "", "C:1", "one"}, {"r2", "", "C:2", "two"}};
    auto result = generate_xref(records, make_table({}), pivot_catalog());
    CHECK(result.pairs.empty());
    REQUIRE(result.diagnostics.size() == 2);
    for (const XrefDiagRow& row : result.diagnostics) {
        CHECK(row.n_pairs == 0);
        CHECK(row.reason == EmptyReason::NoPivot);
    }
}

TEST_CASE("generate_xref hand-traced join with pivot dedup") {
    // edges P:1->C:1 and P:2->C:1; by_xref[P:1]={M:1,M:2}, by_xref[P:2]={M:2}
    // C:1 pairs with M:1 (pivot P:1) and M:2 (pivot P:1, the smaller pivot)
    auto result = generate_xref({{"r1", "", "C:1", "label one"}},
                                make_table({{"P:1", "C:1"}, {"P:2", "C:1"}}), pivot_catalog());
    REQUIRE(result.pairs.size() == 2);
    CHECK(result.pairs[0].target_term_id == "M:1");
    CHECK(result.pairs[0].pivot_id == "P:1");
    CHECK(result.pairs[0].target_label == "term one");
    CHECK(result.pairs[1].target_term_id == "M:2");
    CHECK(result.pairs[1].pivot_id == "P:1");
    CHECK(result.pairs[1].generators == std::set<Generator>{Generator::Xref});
    REQUIRE(result.diagnostics.size() == 1);
    CHECK(result.diagnostics[0].n_pairs == 2);
    CHECK(result.diagnostics[0].reason == EmptyReason::None);
}

TEST_CASE("generate_xref distinguishes no_pivot from no_xref") {
    // C:1 has a pivot nobody cross-references; C:2 is absent from the table
    auto result = generate_xref({{"r1", "", "C:1", ""}, {"r2", "", "C:2", ""}},
                                make_table({{"P:99", "C:1"}}), pivot_catalog());
    CHECK(result.pairs.empty());
    REQUIRE(result.diagnostics.size() == 2);
    CHECK(result.diagnostics[0].code == "C:1");
    CHECK(result.diagnostics[0].reason == EmptyReason::NoXref);
    CHECK(result.diagnostics[1].code == "C:2");
    CHECK(result.diagnostics[1].reason == EmptyReason::NoPivot);
}

TEST_CASE("generate_xref honors the orientation flag") {
    auto flipped = make_table({{"C:1", "P:1"}});   // source -> pivot orientation
    auto result = generate_xref({{"r1", "", "C:1", ""}}, flipped, pivot_catalog(),
                                XrefOrientation::SourceToPivot);
    CHECK(result.pairs.size() == 2);
}

TEST_CASE("randomized generate_xref equals the nested-loop join oracle") {
    std::mt19937_64 rng(77001);
    std::uniform_int_distribution<int> n_terms(1, 40);
    std::uniform_int_distribution<int> n_codes(1, 25);
    std::uniform_int_distribution<int> n_edges(0, 400);
    std::uniform_int_distribution<int> n_pivots(1, 30);
    std::uniform_int_distribution<int> coin(0, 4);

    for (int round = 0; round < 30; ++round) {
        int terms_n = n_terms(rng), codes_n = n_codes(rng), pivots_n = n_pivots(rng);
        std::vector<OntologyTerm> terms;
        std::uniform_int_distribution<int> pivot_pick(1, pivots_n);
        for (int i = 0; i < terms_n; ++i) {
            OntologyTerm t;
            t.id = "M:" + std::to_string(i);
            t.label = "term " + std::to_string(i);
            t.source = "M";
            t.obsolete = coin(rng) == 0;
            std::set<std::string> xs;
            int nx = coin(rng);
            for (int j = 0; j < nx; ++j) xs.insert("P:" + std::to_string(pivot_pick(rng)));
            t.xrefs.assign(xs.begin(), xs.end());
            terms.push_back(std::move(t));
        }
        TermCatalog catalog = build_catalog({terms});

        XrefTable table;
        table.source_namespace = "P";
        table.target_namespace = "C";
        std::uniform_int_distribution<int> code_pick(1, codes_n);
        int edges_n = n_edges(rng);
        for (int e = 0; e < edges_n; ++e)
            table.edges.insert({"P:" + std::to_string(pivot_pick(rng)),
                                "C:" + std::to_string(code_pick(rng))});

        std::vector<SourceRecord> records;
        for (int c = 1; c <= codes_n; ++c)
            records.push_back({"r" + std::to_string(c), "", "C:" + std::to_string(c), ""});

        auto result = generate_xref(records, table, catalog);
        std::set<std::pair<std::string, std::string>> got;
        for (const CandidatePair& p : result.pairs) {
            CHECK(got.insert({p.source_key, p.target_term_id}).second);   // no duplicates
            CHECK(catalog.terms.count(p.target_term_id) == 1);
        }
        CHECK(got == oracle_join(records, table, terms));

        // per-code counts sum to the output size; empty codes are classified
        std::size_t sum = 0;
        for (const XrefDiagRow& row : result.diagnostics) {
            sum += row.n_pairs;
            if (row.n_pairs == 0)
                CHECK((row.reason == EmptyReason::NoPivot || row.reason == EmptyReason::NoXref));
            else
                CHECK(row.reason == EmptyReason::None);
        }
        CHECK(sum == result.pairs.size());
    }
}

TEST_CASE("merge_candidates unions provenance for the same pair") {
    CandidatePair rag;
    rag.record_id = "r1";
    rag.source_key = "ICD10:A01";
    rag.source_text = "alpha";
    rag.target_term_id = "M:1";
    rag.target_label = "term one";
    rag.matched_doc_id = "M:1#L";
    rag.score = 0.91;
    rag.generators = {Generator::Rag};

    CandidatePair xref = rag;
    xref.matched_doc_id = "";
    xref.score.reset();
    xref.pivot_id = "P:1";
    xref.generators = {Generator::Xref};

    auto merged = merge_candidates({{rag}, {xref}});
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].generators == std::set<Generator>{Generator::Rag, Generator::Xref});
    REQUIRE(merged[0].score.has_value());
    CHECK(*merged[0].score == 0.91);
    CHECK(merged[0].pivot_id == "P:1");
    CHECK(merged[0].matched_doc_id == "M:1#L");
    CHECK(generators_to_string(merged[0].generators) == "RAG,XREF");
}

TEST_CASE("merge_candidates of disjoint sets is a sorted concatenation") {
    CandidatePair a;
    a.source_key = "B";
    a.target_term_id = "M:1";
    a.generators = {Generator::Rag};
    CandidatePair b;
    b.source_key = "A";
    b.target_term_id = "M:2";
    b.generators = {Generator::Xref};
    auto merged = merge_candidates({{a}, {b}});
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].source_key == "A");
    CHECK(merged[1].source_key == "B");

    auto identity = merge_candidates({{}, {a, b}});
    CHECK(identity.size() == 2);
}

TEST_CASE("merge_candidates is idempotent and order-insensitive") {
    std::mt19937_64 rng(3111);
    std::uniform_int_distribution<int> pick(1, 6);
    std::vector<CandidatePair> set_a, set_b;
    for (int i = 0; i < 20; ++i) {
        CandidatePair p;
        p.record_id = "r" + std::to_string(pick(rng));
        p.source_key = "C:" + std::to_string(pick(rng));
        p.source_text = "text";
        p.target_term_id = "M:" + std::to_string(pick(rng));
        if (i % 2 == 0) {
            p.score = 0.5;
            p.generators = {Generator::Rag};
        } else {
            p.pivot_id = "P:" + std::to_string(pick(rng));
            p.generators = {Generator::Xref};
        }
        (i % 3 == 0 ? set_a : set_b).push_back(std::move(p));
    }

    auto ab = merge_candidates({set_a, set_b});
    auto ba = merge_candidates({set_b, set_a});
    auto twice = merge_candidates({ab, ab});

    auto keys = [](const std::vector<CandidatePair>& pairs) {
        std::vector<std::tuple<std::string, std::string, std::string>> out;
        for (const CandidatePair& p : pairs)
            out.push_back({p.source_key, p.target_term_id, generators_to_string(p.generators)});
        return out;
    };
    CHECK(keys(ab) == keys(ba));
    CHECK(keys(twice) == keys(ab));
    REQUIRE(twice.size() == ab.size());
    for (std::size_t i = 0; i < ab.size(); ++i) {
        CHECK(twice[i].record_id == ab[i].record_id);
        CHECK(twice[i].score == ab[i].score);
        CHECK(twice[i].pivot_id == ab[i].pivot_id);
    }
}

TEST_CASE("pair files round-trip with all fields") {
    CandidatePair p;
    p.record_id = "r1";
    p.source_key = "ICD10:Q878";
    p.source_text = "Other specified congenital malformation syndromes";
    p.target_term_id = "MONDO:0019755";
    p.target_label = "some syndrome";
    p.matched_doc_id = "MONDO:0019755#S2";
    p.score = 0.8251953125;
    p.pivot_id = "SNOMEDCT:253098";
    p.generators = {Generator::Rag, Generator::Xref};

    std::ostringstream out;
    write_pairs(out, {p}, {{"format", "termalign/pairs"}});
    std::istringstream in(out.str());
    LoadedPairs loaded = read_pairs(in);
    REQUIRE(loaded.pairs.size() == 1);
    const CandidatePair& q = loaded.pairs[0];
    CHECK(q.record_id == p.record_id);
    CHECK(q.source_key == p.source_key);
    CHECK(q.source_text == p.source_text);
    CHECK(q.target_term_id == p.target_term_id);
    CHECK(q.target_label == p.target_label);
    CHECK(q.matched_doc_id == p.matched_doc_id);
    CHECK(q.score == p.score);
    CHECK(q.pivot_id == p.pivot_id);
    CHECK(q.generators == p.generators);

    std::ostringstream again;
    write_pairs(again, loaded.pairs, {{"format", "termalign/pairs"}});
    CHECK(again.str() == out.str());
}
