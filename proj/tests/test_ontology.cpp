#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <sstream>

#include "termalign/ontology.hpp"

using namespace termalign;

namespace {

const char* kTwoStanzaFixture =
    "format-version: 1.2\n"
    "ontology: mondo\n"
    "\n"
    "[Term]\n"
    "id: MONDO:0005267\n"
    "name: heart disorder\n"
    "synonym: \"heart attack\" EXACT []\n"
    "xref: SNOMEDCT:56265001\n"
    "\n"
    "[Term]\n"
    "id: MONDO:0000001\n"
    "name: disease\n"
    "is_obsolete: true\n";

}  // namespace

TEST_CASE("parse_obo on an empty stream yields no terms") {
    std::istringstream in("");
    auto result = parse_obo(in, "MONDO");
    CHECK(result.terms.empty());
    CHECK(result.issues.empty());
}

TEST_CASE("parse_obo hand-traced two-stanza fixture") {
    std::istringstream in(kTwoStanzaFixture);
    auto result = parse_obo(in, "MONDO");
    REQUIRE(result.terms.size() == 2);

    const OntologyTerm& first = result.terms[0];
    CHECK(first.id == "MONDO:0005267");
    CHECK(first.label == "heart disorder");
    CHECK(first.source == "MONDO");
    CHECK_FALSE(first.obsolete);
    REQUIRE(first.synonyms.size() == 1);
    CHECK(first.synonyms[0].text == "heart attack");
    CHECK(first.synonyms[0].scope == SynonymScope::Exact);
    REQUIRE(first.xrefs.size() == 1);
    CHECK(first.xrefs[0] == "SNOMEDCT:56265001");

    const OntologyTerm& second = result.terms[1];
    CHECK(second.id == "MONDO:0000001");
    CHECK(second.obsolete);
}

TEST_CASE("parse_obo ignores other stanza types and unknown tags") {
    std::istringstream in(
        "[Typedef]\n"
        "id: part_of\n"
        "\n"
        "[Term]\n"
        "id: HP:0001250\n"
        "name: seizure\n"
        "def: \"something\" []\n"
        "comment: ignored\n");
    auto result = parse_obo(in, "HPO");
    REQUIRE(result.terms.size() == 1);
    CHECK(result.terms[0].id == "HP:0001250");
}

TEST_CASE("synonym scope defaults to UNSPECIFIED") {
    std::istringstream in(
        "[Term]\n"
        "id: HP:0000001\n"
        "name: all\n"
        "synonym: \"everything\" []\n"
        "synonym: \"wide\" BROAD []\n");
    auto result = parse_obo(in, "HPO");
    REQUIRE(result.terms.size() == 1);
    REQUIRE(result.terms[0].synonyms.size() == 2);
    CHECK(result.terms[0].synonyms[0].scope == SynonymScope::Unspecified);
    CHECK(result.terms[0].synonyms[1].scope == SynonymScope::Broad);
}

TEST_CASE("synonyms deduplicate on normalized text and scope") {
    std::istringstream in(
        "[Term]\n"
        "id: HP:0000002\n"
        "name: x\n"
        "synonym: \"Heart  Attack\" EXACT []\n"
        "synonym: \"heart attack\" EXACT []\n"
        "synonym: \"heart attack\" RELATED []\n");
    auto result = parse_obo(in, "HPO");
    REQUIRE(result.terms.size() == 1);
    CHECK(result.terms[0].synonyms.size() == 2);   // EXACT deduped, RELATED kept
}

TEST_CASE("parse_obo strips trailing comments outside quotes") {
    std::istringstream in(
        "[Term]\n"
        "id: HP:0000003 ! inline note\n"
        "name: thing ! another note\n"
        "synonym: \"a ! b\" EXACT []\n");
    auto result = parse_obo(in, "HPO");
    REQUIRE(result.terms.size() == 1);
    CHECK(result.terms[0].id == "HP:0000003");
    CHECK(result.terms[0].label == "thing");
    REQUIRE(result.terms[0].synonyms.size() == 1);
    CHECK(result.terms[0].synonyms[0].text == "a ! b");
}

TEST_CASE("unbalanced synonym quotes abort in strict mode with a line number") {
    std::istringstream in(
        "[Term]\n"
        "id: HP:0000004\n"
        "name: ok\n"
        "synonym: \"broken EXACT []\n");
    CHECK_THROWS_MATCHES(parse_obo(in, "HPO"), MalformedStanza,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("line 4")));
}

TEST_CASE("lenient mode drops the bad stanza and keeps parsing") {
    std::istringstream in(
        "[Term]\n"
        "id: HP:0000004\n"
        "name: bad one\n"
        "synonym: \"broken EXACT []\n"
        "\n"
        "[Term]\n"
        "id: HP:0000005\n"
        "name: good one\n");
    auto result = parse_obo(in, "HPO", ParseMode::Lenient);
    REQUIRE(result.terms.size() == 1);
    CHECK(result.terms[0].id == "HP:0000005");
    REQUIRE(result.issues.size() == 1);
    CHECK(result.issues[0].line == 4);
}

TEST_CASE("a [Term] stanza without id is malformed") {
    std::istringstream in(
        "[Term]\n"
        "name: nameless\n");
    CHECK_THROWS_AS(parse_obo(in, "HPO"), MalformedStanza);

    std::istringstream again(
        "[Term]\n"
        "name: nameless\n");
    auto lenient = parse_obo(again, "HPO", ParseMode::Lenient);
    CHECK(lenient.terms.empty());
    CHECK(lenient.issues.size() == 1);
}

TEST_CASE("a non-obsolete term without a label is malformed") {
    std::istringstream in(
        "[Term]\n"
        "id: HP:0000006\n");
    CHECK_THROWS_AS(parse_obo(in, "HPO"), MalformedStanza);

    // obsolete terms may lack a label
    std::istringstream obsolete(
        "[Term]\n"
        "id: HP:0000007\n"
        "is_obsolete: true\n");
    auto result = parse_obo(obsolete, "HPO");
    REQUIRE(result.terms.size() == 1);
    CHECK(result.terms[0].obsolete);
}

TEST_CASE("parsed ids and labels appear verbatim in the source stream") {
    std::string source = kTwoStanzaFixture;
    std::istringstream in(source);
    auto result = parse_obo(in, "MONDO");
    for (const OntologyTerm& term : result.terms) {
        if (term.obsolete) continue;
        CHECK(source.find(term.id) != std::string::npos);
        CHECK(source.find(term.label) != std::string::npos);
    }
}

TEST_CASE("lenient parser survives arbitrary byte noise, error count monotone") {
    std::mt19937_64 rng(20240817);
    for (int round = 0; round < 25; ++round) {
        std::string noise;
        std::uniform_int_distribution<int> len(0, 2000);
        std::uniform_int_distribution<int> byte(0, 255);
        int n = len(rng);
        for (int i = 0; i < n; ++i) noise.push_back(static_cast<char>(byte(rng)));
        std::istringstream in(noise);
        CHECK_NOTHROW(parse_obo(in, "X", ParseMode::Lenient));
    }

    // corrupting more synonym lines never lowers the issue count
    std::string base;
    for (int i = 0; i < 8; ++i) {
        base += "[Term]\nid: HP:000000" + std::to_string(i) + "\nname: term " +
                std::to_string(i) + "\nsynonym: \"syn " + std::to_string(i) + "\" EXACT []\n\n";
    }
    std::size_t previous = 0;
    for (int corrupt = 0; corrupt <= 8; ++corrupt) {
        std::string mutated = base;
        std::size_t pos = 0;
        for (int c = 0; c < corrupt; ++c) {
            pos = mutated.find("\" EXACT", pos);
            REQUIRE(pos != std::string::npos);
            mutated.erase(pos, 1);   // drop the closing quote
            pos += 1;
        }
        std::istringstream in(mutated);
        auto result = parse_obo(in, "HPO", ParseMode::Lenient);
        CHECK(result.issues.size() >= previous);
        CHECK(result.issues.size() == static_cast<std::size_t>(corrupt));
        previous = result.issues.size();
    }
}

TEST_CASE("parse_crosswalk on a header-only stream") {
    std::istringstream in("source_id\ttarget_id\n");
    auto result = parse_crosswalk(in, "SNOMEDCT", "ICD10");
    CHECK(result.table.edges.empty());
    CHECK(result.skipped_rows == 0);
}

TEST_CASE("parse_crosswalk hand-traced four-row fixture") {
    // duplicate row collapses, empty target is skipped: 2 edges, 1 skipped
    std::istringstream in(
        "source_id\ttarget_id\n"
        "SNOMEDCT:1\tICD10:A01\n"
        "SNOMEDCT:1\tICD10:A01\n"
        "SNOMEDCT:2\t\n"
        "SNOMEDCT:3\tICD10:B02\n");
    auto result = parse_crosswalk(in, "SNOMEDCT", "ICD10");
    CHECK(result.table.edges.size() == 2);
    CHECK(result.skipped_rows == 1);
    CHECK(result.table.edges.count({"SNOMEDCT:1", "ICD10:A01"}) == 1);
    CHECK(result.table.edges.count({"SNOMEDCT:3", "ICD10:B02"}) == 1);
}

TEST_CASE("parse_crosswalk normalizes ids") {
    std::istringstream in(
        "source_id\ttarget_id\n"
        "snomedct:22298006\ticd10:I21.9\n");
    auto result = parse_crosswalk(in, "SNOMEDCT", "ICD10");
    REQUIRE(result.table.edges.size() == 1);
    CHECK(result.table.edges.count({"SNOMEDCT:22298006", "ICD10:I219"}) == 1);
}

TEST_CASE("parse_crosswalk rejects narrow headers") {
    std::istringstream in("just_one_column\nSNOMEDCT:1\n");
    CHECK_THROWS_AS(parse_crosswalk(in, "SNOMEDCT", "ICD10"), HeaderMismatch);
}

TEST_CASE("namespace violations: strict throws, lenient skips") {
    std::string data =
        "source_id\ttarget_id\n"
        "UMLS:C123\tICD10:A01\n"
        "SNOMEDCT:9\tICD10:A02\n";
    {
        std::istringstream in(data);
        CHECK_THROWS_AS(parse_crosswalk(in, "SNOMEDCT", "ICD10"), NamespaceViolation);
    }
    {
        std::istringstream in(data);
        auto result = parse_crosswalk(in, "SNOMEDCT", "ICD10", ParseMode::Lenient);
        CHECK(result.table.edges.size() == 1);
        REQUIRE(result.issues.size() == 1);
        CHECK(result.issues[0].line == 2);
    }
}

TEST_CASE("parse_crosswalk is idempotent under row permutation and duplication") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> ids(1, 40);
    std::vector<std::string> rows;
    for (int i = 0; i < 60; ++i)
        rows.push_back("SNOMEDCT:" + std::to_string(ids(rng)) + "\tICD10:A" +
                       std::to_string(ids(rng)));

    auto table_of = [](const std::vector<std::string>& lines) {
        std::string data = "source_id\ttarget_id\n";
        for (const std::string& l : lines) data += l + "\n";
        std::istringstream in(data);
        return parse_crosswalk(in, "SNOMEDCT", "ICD10").table.edges;
    };

    auto baseline = table_of(rows);
    std::vector<std::string> shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.insert(shuffled.end(), rows.begin(), rows.begin() + 20);   // duplicates
    CHECK(table_of(shuffled) == baseline);
}

TEST_CASE("build_catalog merges disjoint ontologies") {
    OntologyTerm a{"MONDO:1", "alpha", {}, {"SNOMEDCT:123"}, "MONDO", false};
    OntologyTerm b{"HP:1", "beta", {}, {}, "HPO", false};
    TermCatalog catalog = build_catalog({{a}, {b}});
    CHECK(catalog.terms.size() == 2);
    CHECK(catalog.sources == std::set<std::string>{"MONDO", "HPO"});
    REQUIRE(catalog.by_xref.count("SNOMEDCT:123") == 1);
    CHECK(catalog.by_xref.at("SNOMEDCT:123") == std::set<std::string>{"MONDO:1"});
}

TEST_CASE("obsolete terms stay in the catalog but not in by_xref") {
    OntologyTerm dead{"MONDO:2", "gone", {}, {"SNOMEDCT:9"}, "MONDO", true};
    TermCatalog catalog = build_catalog({{dead}});
    CHECK(catalog.terms.count("MONDO:2") == 1);
    CHECK(catalog.by_xref.count("SNOMEDCT:9") == 0);
}

TEST_CASE("build_catalog rejects duplicate term ids") {
    OntologyTerm a{"MONDO:3", "x", {}, {}, "MONDO", false};
    OntologyTerm b{"MONDO:3", "y", {}, {}, "HPO", false};
    CHECK_THROWS_MATCHES(build_catalog({{a}, {b}}), DuplicateTermId,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("MONDO:3")));
}

TEST_CASE("by_xref is exactly the inverse of non-obsolete xrefs") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> n_xrefs(0, 4);
    std::uniform_int_distribution<int> xref_id(1, 25);

    std::vector<OntologyTerm> terms;
    for (int i = 0; i < 50; ++i) {
        OntologyTerm t;
        t.id = "T:" + std::to_string(i);
        t.label = "term " + std::to_string(i);
        t.source = "T";
        t.obsolete = coin(rng) == 0 && i % 5 == 0;
        int nx = n_xrefs(rng);
        std::set<std::string> xs;
        for (int j = 0; j < nx; ++j) xs.insert("X:" + std::to_string(xref_id(rng)));
        t.xrefs.assign(xs.begin(), xs.end());
        terms.push_back(std::move(t));
    }
    TermCatalog catalog = build_catalog({terms});

    for (const auto& [id, term] : catalog.terms) {
        for (const std::string& x : term.xrefs) {
            bool indexed = catalog.by_xref.count(x) && catalog.by_xref.at(x).count(id);
            CHECK(indexed == !term.obsolete);
        }
    }
    for (const auto& [xref, ids] : catalog.by_xref) {
        for (const std::string& id : ids) {
            const OntologyTerm& term = catalog.terms.at(id);
            CHECK_FALSE(term.obsolete);
            CHECK(std::count(term.xrefs.begin(), term.xrefs.end(), xref) == 1);
        }
    }
}

TEST_CASE("catalog dump round-trips through the line format") {
    std::istringstream in(kTwoStanzaFixture);
    auto parsed = parse_obo(in, "MONDO");
    TermCatalog catalog = build_catalog({parsed.terms});

    std::ostringstream out;
    write_catalog(out, catalog, {{"format", "termalign/catalog"}, {"catalog_version", "test"}});
    std::istringstream back(out.str());
    LoadedCatalog loaded = read_catalog(back);
    CHECK(loaded.header.at("catalog_version") == "test");
    REQUIRE(loaded.catalog.terms.size() == catalog.terms.size());
    CHECK(loaded.catalog.terms.at("MONDO:0005267").synonyms.size() == 1);
    CHECK(loaded.catalog.by_xref == catalog.by_xref);

    std::ostringstream again;
    write_catalog(again, loaded.catalog,
                  {{"format", "termalign/catalog"}, {"catalog_version", "test"}});
    CHECK(again.str() == out.str());
}
