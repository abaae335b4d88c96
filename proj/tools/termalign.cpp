// termalign: map clinical text and codes onto ontology vocabularies.
//
// Six staged subcommands over persisted files, driven by one JSON config:
//   ingest -> corpus -> index -> generate -> adjudicate -> evaluate
// Each stage is restartable and rewrites byte-identical outputs when its
// inputs are unchanged.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "termalign/config.hpp"
#include "termalign/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitProvider = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool lenient = false;
};

termalign::PipelineConfig load(const CommonArgs& args) {
    termalign::PipelineConfig config = termalign::load_config(args.config_path);
    if (!args.out_dir.empty()) config.output_dir = args.out_dir;   // flags win
    if (args.lenient) config.lenient = true;
    return config;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_lenient = false) {
    cmd->add_option("--config", args.config_path, "pipeline config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    if (with_lenient)
        cmd->add_flag("--lenient", args.lenient, "tolerate malformed input rows/stanzas");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ontology term alignment pipeline"};
    app.require_subcommand(1);

    CommonArgs ingest_args;
    CLI::App* ingest = app.add_subcommand("ingest", "parse ontologies and crosswalk tables");
    add_common(ingest, ingest_args, /*with_lenient=*/true);

    CommonArgs corpus_args;
    CLI::App* corpus = app.add_subcommand("corpus", "extract label/synonym documents");
    add_common(corpus, corpus_args);

    CommonArgs index_args;
    CLI::App* index = app.add_subcommand("index", "embed the corpus and build the index");
    add_common(index, index_args);

    CommonArgs generate_args;
    std::string generator = "both";
    std::optional<std::size_t> k_override;
    CLI::App* generate = app.add_subcommand("generate", "produce candidate pairs");
    add_common(generate, generate_args, /*with_lenient=*/true);
    generate->add_option("--generator", generator, "rag, xref or both")
        ->check(CLI::IsMember({"rag", "xref", "both"}));
    generate->add_option("--k", k_override, "retrieval depth per record");

    CommonArgs adjudicate_args;
    std::string pairs_path;
    std::string criteria_override;
    CLI::App* adjudicate = app.add_subcommand("adjudicate", "ask the LLM to accept/reject pairs");
    add_common(adjudicate, adjudicate_args);
    adjudicate->add_option("--pairs", pairs_path,
                           "candidate pair file (default: merged, else rag)");
    adjudicate->add_option("--criteria", criteria_override, "acceptance criteria name");

    CommonArgs evaluate_args;
    termalign::EvaluateOptions eval_options;
    std::string decisions_path, human_path, report_path;
    std::optional<std::size_t> sample_size;
    std::uint64_t seed = 0;
    bool post_adjudication = false;
    CLI::App* evaluate = app.add_subcommand("evaluate", "compute statistics and write the report");
    add_common(evaluate, evaluate_args);
    evaluate->add_option("--decisions", decisions_path,
                         "decisions file (default: <out>/decisions.jsonl)");
    evaluate->add_option("--human", human_path,
                         "verdict-pair CSV (pair_key,human_verdict,llm_verdict)");
    evaluate->add_option("--report", report_path, "report path (default: <out>/report.json)");
    evaluate->add_option("--sample", sample_size,
                         "export a deterministic audit sample of N pairs");
    evaluate->add_option("--seed", seed, "audit sampling seed (recorded in the report)");
    evaluate->add_flag("--post-adjudication", post_adjudication,
                       "fan-out distribution over accepted pairs only");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            termalign::cmd_ingest(load(ingest_args));
        } else if (*corpus) {
            termalign::cmd_corpus(load(corpus_args));
        } else if (*index) {
            termalign::cmd_index(load(index_args));
        } else if (*generate) {
            termalign::PipelineConfig config = load(generate_args);
            if (k_override) config.k = *k_override;
            termalign::cmd_generate(config, generator);
        } else if (*adjudicate) {
            termalign::PipelineConfig config = load(adjudicate_args);
            if (!criteria_override.empty()) config.criteria = criteria_override;
            termalign::cmd_adjudicate(config, pairs_path);
        } else if (*evaluate) {
            termalign::PipelineConfig config = load(evaluate_args);
            config.report.post_adjudication |= post_adjudication;
            eval_options.decisions_path = decisions_path;
            eval_options.human_csv = human_path;
            eval_options.report_path = report_path;
            eval_options.sample_size = sample_size;
            eval_options.seed = seed;
            termalign::cmd_evaluate(config, eval_options);
        }
    } catch (const termalign::ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const termalign::ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const termalign::Error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
