#pragma once

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rhetor/config.hpp"
#include "rhetor/corpus.hpp"
#include "rhetor/discourse.hpp"
#include "rhetor/evaluation.hpp"
#include "rhetor/extraction.hpp"
#include "rhetor/gateway.hpp"
#include "rhetor/http_transport.hpp"
#include "rhetor/prompts.hpp"
#include "rhetor/sectioning.hpp"

namespace rhetor::cli {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

inline Gateway make_gateway(const PipelineConfig& config) {
    GatewayConfig g = config.gateway_config();
    if (config.mode == GatewayMode::replay) return Gateway(std::move(g));
    return Gateway(std::move(g), make_http_transport(g));
}

inline prompts::Library make_library(const PipelineConfig& config) {
    return config.prompt_dir.empty() ? prompts::Library::builtin()
                                     : prompts::Library::from_directory(config.prompt_dir);
}

inline FeatureDefinition feature_for(const PipelineConfig& config) {
    if (config.feature_id == "punitive_component")
        return FeatureDefinition::punitive_component();
    throw std::invalid_argument("unknown feature id: " + config.feature_id);
}

inline void save_prompt(const fs::path& path, const PlanPrompt& prompt) {
    json j{{"feature_id", prompt.feature_id},
           {"version", prompt.version},
           {"text", prompt.text}};
    if (prompt.parent_version) j["parent_version"] = *prompt.parent_version;
    if (!prompt.revision_rationale.empty()) j["revision_rationale"] = prompt.revision_rationale;
    atomic_write_text(path, j.dump(2) + "\n");
}

inline PlanPrompt load_prompt(const fs::path& path) {
    const json j = json::parse(read_text_file(path));
    PlanPrompt p;
    p.feature_id = j.at("feature_id").get<std::string>();
    p.version = j.at("version").get<int>();
    p.text = j.at("text").get<std::string>();
    if (j.contains("parent_version")) p.parent_version = j["parent_version"].get<int>();
    p.revision_rationale = j.value("revision_rationale", "");
    return p;
}

inline void save_trees(const fs::path& path, const std::vector<RstTree>& trees) {
    std::vector<json> records;
    records.reserve(trees.size());
    for (const auto& t : trees) records.push_back(serialize_tree(t));
    save_jsonl(path, records);
}

inline std::map<std::string, RstTree> load_trees(const fs::path& path) {
    std::map<std::string, RstTree> trees;
    for (const auto& record : load_jsonl(path)) {
        RstTree tree = parse_tree(record);
        trees[tree.doc_id] = std::move(tree);
    }
    return trees;
}

// Portable deterministic shuffle (std::shuffle sequences are not pinned by
// the standard).
inline void deterministic_shuffle(std::vector<std::string>& ids, unsigned seed) {
    std::mt19937 gen(seed);
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[gen() % i]);
}

enum class SplitSelection { train, test, all };

inline SplitSelection split_selection_from_string(const std::string& s) {
    if (s == "train") return SplitSelection::train;
    if (s == "test") return SplitSelection::test;
    if (s == "all") return SplitSelection::all;
    throw std::invalid_argument("unknown split: " + s);
}

// Seeded split over the sorted document ids; train gets the first train_size
// of the shuffled order, test the following test_size.
inline std::vector<std::string> select_doc_ids(const Corpus& corpus, const SplitConfig& split,
                                               SplitSelection selection) {
    std::vector<std::string> ids;
    ids.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) ids.push_back(d.id);
    std::sort(ids.begin(), ids.end());
    if (selection == SplitSelection::all) return ids;
    deterministic_shuffle(ids, split.seed);
    const std::size_t train_n = std::min<std::size_t>(ids.size(),
                                                      static_cast<std::size_t>(split.train_size));
    if (selection == SplitSelection::train)
        return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(train_n)};
    const std::size_t test_end = std::min<std::size_t>(
        ids.size(), train_n + static_cast<std::size_t>(split.test_size));
    std::vector<std::string> test(ids.begin() + static_cast<std::ptrdiff_t>(train_n),
                                  ids.begin() + static_cast<std::ptrdiff_t>(test_end));
    std::sort(test.begin(), test.end());
    return test;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_ingest(const PipelineConfig& config, const std::vector<std::string>& inputs,
                      const std::string& delimiter_override) {
    SplitterConfig splitter;
    if (!config.splitter_rules.empty()) {
        const json j = json::parse(read_text_file(config.splitter_rules));
        if (j.contains("delimiter")) splitter.delimiter = j["delimiter"].get<std::string>();
    }
    if (!delimiter_override.empty()) splitter.delimiter = delimiter_override;
    const MetadataRules metadata_rules =
        config.metadata_rules.empty()
            ? MetadataRules::defaults()
            : MetadataRules::from_json(json::parse(read_text_file(config.metadata_rules)));
    const CitationRules citation_rules =
        config.citation_rules.empty()
            ? CitationRules::defaults()
            : CitationRules::from_json(json::parse(read_text_file(config.citation_rules)));

    Corpus corpus;
    std::vector<Citation> citations;
    for (const auto& input : inputs) {
        const std::string raw = read_text_file(input);
        for (const auto& block : split_cases(raw, splitter).case_blocks()) {
            Document doc = extract_metadata(block, metadata_rules);
            while (corpus.find(doc.id) != nullptr) doc.id += "+";  // disambiguate collisions
            auto cites = extract_citations(doc, citation_rules);
            citations.insert(citations.end(), cites.begin(), cites.end());
            corpus.documents.push_back(std::move(doc));
        }
    }
    std::vector<std::string> warnings;
    const CitationGraph graph = build_graph(corpus, citations, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    fs::create_directories(config.output_dir);
    save_corpus(config.output_dir / "corpus.jsonl", corpus);
    std::vector<json> cite_records;
    for (const auto& c : citations)
        cite_records.push_back(
            {{"source_doc", c.source_doc},
             {"kind", c.kind == CitationKind::statute_ref ? "statute" : "case"},
             {"target", c.target},
             {"raw_text", c.raw_text},
             {"offset", c.offset}});
    save_jsonl(config.output_dir / "citations.jsonl", cite_records);
    atomic_write_text(config.output_dir / "graph.json", graph.to_json().dump(2) + "\n");
    std::cout << "ingested " << corpus.documents.size() << " documents, " << citations.size()
              << " citations, " << graph.nodes.size() << " graph nodes\n";
    return 0;
}

inline int cmd_segment(const PipelineConfig& config, const fs::path& corpus_path) {
    const Corpus corpus = load_corpus(corpus_path);
    Gateway gateway = make_gateway(config);
    const prompts::Library library = make_library(config);

    std::vector<SegmentedOpinion> all;
    std::vector<std::string> warnings;
    for (const auto& doc : corpus.documents) {
        SegmentedOpinion seg = segment(doc, gateway, library);
        for (auto& s : seg.sections)
            s.label = label_section(doc.opinion_text, s, gateway, library, &warnings);
        all.push_back(std::move(seg));
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    fs::create_directories(config.output_dir);
    save_segmented(config.output_dir / "segmented.jsonl", all);
    std::cout << "segmented " << all.size() << " documents\n";
    return 0;
}

inline int cmd_rst_import(const PipelineConfig& config, const std::vector<std::string>& inputs) {
    std::vector<RstTree> trees;
    std::vector<std::string> warnings;
    for (const auto& input : inputs) {
        const std::string text = read_text_file(input);
        const std::string trimmed(detail::trim(text));
        if (trimmed.empty()) continue;
        if (trimmed.front() == '{' && trimmed.find('\n') == std::string::npos) {
            trees.push_back(parse_tree(trimmed, TreeFormat::pipeline_json, &warnings));
        } else {
            // JSONL store or a pretty-printed single tree.
            bool parsed_any = false;
            try {
                for (const auto& record : load_jsonl(input)) {
                    trees.push_back(parse_tree(record, TreeFormat::pipeline_json, &warnings));
                    parsed_any = true;
                }
            } catch (const FormatError&) {
                if (parsed_any) throw;
                trees.push_back(parse_tree(trimmed, TreeFormat::pipeline_json, &warnings));
            }
        }
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    fs::create_directories(config.output_dir);
    save_trees(config.output_dir / "trees.jsonl", trees);
    std::cout << "imported " << trees.size() << " trees\n";
    return 0;
}

inline std::vector<TrainExample> build_train_set(const Corpus& corpus,
                                                 const std::vector<SegmentedOpinion>& segmented,
                                                 const std::map<std::string, RstTree>& trees,
                                                 const std::string& feature_id,
                                                 const std::vector<std::string>& ids) {
    std::map<std::string, const SegmentedOpinion*> seg_by_id;
    for (const auto& s : segmented) seg_by_id[s.doc_id] = &s;

    std::vector<TrainExample> train;
    for (const auto& id : ids) {
        const Document* doc = corpus.find(id);
        if (doc == nullptr) throw std::invalid_argument("unknown document id: " + id);
        auto gold_doc = corpus.gold_labels.find(id);
        if (gold_doc == corpus.gold_labels.end() || !gold_doc->second.count(feature_id))
            throw std::invalid_argument("no gold label for document " + id);
        auto seg_it = seg_by_id.find(id);
        if (seg_it == seg_by_id.end())
            throw std::invalid_argument("no segmented sections for document " + id);
        auto tree_it = trees.find(id);
        if (tree_it == trees.end())
            throw std::invalid_argument("no discourse tree for document " + id);
        TrainExample example;
        example.bundle = {*doc, *seg_it->second, tree_it->second};
        example.gold = gold_doc->second.at(feature_id);
        train.push_back(std::move(example));
    }
    return train;
}

inline int cmd_optimize(const PipelineConfig& config, const fs::path& corpus_path,
                        const fs::path& segmented_path, const fs::path& trees_path,
                        const fs::path& gold_path, const fs::path& seed_prompt_path) {
    Corpus corpus = load_corpus(corpus_path);
    corpus.gold_labels = load_gold_labels(gold_path);
    const auto segmented = load_segmented(segmented_path);
    const auto trees = load_trees(trees_path);
    const FeatureDefinition feature = feature_for(config);
    const prompts::Library library = make_library(config);
    Gateway gateway = make_gateway(config);

    std::vector<std::string> labeled_ids;
    for (const auto& [id, features] : corpus.gold_labels)
        if (features.count(feature.id) && corpus.find(id) != nullptr) labeled_ids.push_back(id);
    std::sort(labeled_ids.begin(), labeled_ids.end());
    deterministic_shuffle(labeled_ids, config.split.seed);
    const std::size_t train_n = std::min<std::size_t>(
        labeled_ids.size(), static_cast<std::size_t>(config.split.train_size));
    labeled_ids.resize(train_n);

    const std::vector<TrainExample> train =
        build_train_set(corpus, segmented, trees, feature.id, labeled_ids);

    PlanPrompt seed = seed_prompt_path.empty() ? make_seed_prompt(feature, library)
                                               : load_prompt(seed_prompt_path);
    OptimizationBudget budget;
    budget.max_iterations = config.max_iterations;
    auto [best, trace] = optimize(feature, train, seed, budget, gateway, library);

    fs::create_directories(config.output_dir);
    save_prompt(config.output_dir / ("prompt_" + feature.id + ".json"), best);
    atomic_write_text(config.output_dir / "optimize_trace.json", trace.to_json().dump(2) + "\n");
    std::cout << "optimized prompt for " << feature.id << ": version " << best.version
              << ", best train accuracy " << trace.best_accuracy()
              << (trace.budget_exhausted ? " (budget exhausted)" : "") << "\n";
    return 0;
}

inline int cmd_extract(const PipelineConfig& config, const std::string& method_name,
                       const fs::path& corpus_path, const fs::path& segmented_path,
                       const fs::path& trees_path, const fs::path& gold_path,
                       const fs::path& prompt_path, SplitSelection selection) {
    Corpus corpus = load_corpus(corpus_path);
    if (!gold_path.empty()) corpus.gold_labels = load_gold_labels(gold_path);
    const FeatureDefinition feature = feature_for(config);
    const prompts::Library library = make_library(config);

    std::vector<std::string> methods;
    if (method_name == "all")
        methods = {"random", "vanilla", "cot", "agentic", "agentic_tod"};
    else
        methods = {method_name};

    const std::vector<std::string> ids = select_doc_ids(corpus, config.split, selection);

    for (const auto& name : methods) {
        const Method method = method_from_string(name);
        std::vector<ExtractionResult> results;

        if (method == Method::random) {
            results = run_random(ids, feature.id, config.p_positive, config.seed);
        } else {
            Gateway gateway = make_gateway(config);
            std::vector<SegmentedOpinion> segmented;
            std::map<std::string, RstTree> trees;
            PlanPrompt prompt;
            if (method == Method::agentic || method == Method::agentic_tod) {
                prompt = prompt_path.empty() || !fs::exists(prompt_path)
                             ? make_seed_prompt(feature, library)
                             : load_prompt(prompt_path);
            }
            if (method == Method::agentic_tod) {
                segmented = load_segmented(segmented_path);
                trees = load_trees(trees_path);
            }
            std::map<std::string, const SegmentedOpinion*> seg_by_id;
            for (const auto& s : segmented) seg_by_id[s.doc_id] = &s;

            for (const auto& id : ids) {
                const Document& doc = *corpus.find(id);
                std::vector<std::string> warnings;
                ExtractionResult result;
                switch (method) {
                    case Method::vanilla:
                        result = run_vanilla(doc, feature, gateway, library, {}, &warnings);
                        break;
                    case Method::cot:
                        result = run_cot(doc, feature, gateway, library, {}, &warnings);
                        break;
                    case Method::agentic:
                        result =
                            run_agentic(doc, feature, prompt, gateway, library, {}, &warnings);
                        break;
                    case Method::agentic_tod: {
                        auto seg_it = seg_by_id.find(id);
                        if (seg_it == seg_by_id.end())
                            throw std::invalid_argument("no segmented sections for document " +
                                                        id);
                        auto tree_it = trees.find(id);
                        if (tree_it == trees.end())
                            throw std::invalid_argument("no discourse tree for document " + id);
                        result = run_agentic_tod(doc, *seg_it->second, tree_it->second, feature,
                                                 prompt, gateway, library, {}, &warnings);
                        break;
                    }
                    default: break;
                }
                for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
                results.push_back(std::move(result));
            }
        }
        fs::create_directories(config.output_dir);
        save_results(config.output_dir / ("results_" + name + ".jsonl"), results);
        std::cout << "extracted " << results.size() << " results with method " << name << "\n";
    }
    return 0;
}

inline int cmd_evaluate(const PipelineConfig& config, const std::vector<std::string>& result_paths,
                        const fs::path& gold_path) {
    const auto gold = load_gold_labels(gold_path);
    const FeatureDefinition feature = feature_for(config);

    // Group predictions by method across all result files.
    std::map<std::string, std::map<std::string, std::string>> by_method;
    for (const auto& path : result_paths)
        for (const auto& r : load_results(path))
            if (r.feature_id == feature.id)
                by_method[to_string(r.method)][r.doc_id] = to_wire(r.label);

    if (by_method.empty()) throw std::invalid_argument("no results to evaluate");

    std::map<std::string, std::string> golds;
    for (const auto& [method, predictions] : by_method)
        for (const auto& [doc_id, label] : predictions) {
            auto it = gold.find(doc_id);
            if (it == gold.end() || !it->second.count(feature.id))
                throw IdMismatch("no gold label for document " + doc_id);
            golds[doc_id] = it->second.at(feature.id) ? "true" : "false";
        }

    std::vector<std::pair<std::string, std::map<std::string, std::string>>> rows(
        by_method.begin(), by_method.end());
    const Report report = compare(rows, golds);

    fs::create_directories(config.output_dir);
    atomic_write_text(config.output_dir / "report.json", report.to_json().dump(2) + "\n");
    atomic_write_text(config.output_dir / "report.txt", report.to_text());
    std::cout << report.to_text();
    return 0;
}

inline int cmd_report(const PipelineConfig& config, const fs::path& report_path) {
    const Report report = Report::from_json(json::parse(read_text_file(report_path)));
    (void)config;
    std::cout << report.to_text();
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> args) {
    CLI::App app{"Discourse-aware extraction of judicial reasoning from copyright damage "
                 "opinions"};
    app.require_subcommand(1);

    std::string config_path;
    std::string mode;
    std::string fixtures;
    std::string output_dir;
    std::string prompt_dir;
    unsigned seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "pipeline config file (JSON)");
    app.add_option("--mode", mode, "gateway mode: live|record|replay")
        ->check(CLI::IsMember({"live", "record", "replay"}));
    app.add_option("--fixtures", fixtures, "fixture JSONL path for record/replay");
    app.add_option("--output-dir", output_dir, "artifact output directory");
    app.add_option("--prompt-dir", prompt_dir, "prompt template directory");
    app.add_option("--seed", seed, "random seed")->each([&](const std::string&) {
        seed_set = true;
    });

    // ingest
    auto* ingest = app.add_subcommand("ingest", "split raw case files and build the corpus");
    std::vector<std::string> ingest_inputs;
    std::string delimiter;
    ingest->add_option("--input", ingest_inputs, "raw case text file(s)")->required();
    ingest->add_option("--delimiter", delimiter, "case delimiter override");

    // segment
    auto* segment_cmd = app.add_subcommand("segment", "segment and label opinions");
    std::string corpus_path = "";
    segment_cmd->add_option("--corpus", corpus_path, "corpus JSONL path");

    // rst-import
    auto* rst_import = app.add_subcommand("rst-import", "validate and store discourse trees");
    std::vector<std::string> tree_inputs;
    rst_import->add_option("--input", tree_inputs, "tree JSON/JSONL file(s)")->required();

    // optimize
    auto* optimize_cmd = app.add_subcommand("optimize", "optimize the plan-generation prompt");
    std::string opt_corpus, opt_segmented, opt_trees, opt_gold, opt_seed_prompt;
    int max_iterations = -1;
    optimize_cmd->add_option("--corpus", opt_corpus, "corpus JSONL path");
    optimize_cmd->add_option("--segmented", opt_segmented, "segmented JSONL path");
    optimize_cmd->add_option("--trees", opt_trees, "trees JSONL path");
    optimize_cmd->add_option("--gold", opt_gold, "gold label JSONL path")->required();
    optimize_cmd->add_option("--seed-prompt", opt_seed_prompt, "seed prompt JSON path");
    optimize_cmd->add_option("--max-iterations", max_iterations, "revision budget");

    // extract
    auto* extract_cmd = app.add_subcommand("extract", "run an extraction method");
    std::string method = "agentic_tod";
    std::string ext_corpus, ext_segmented, ext_trees, ext_gold, ext_prompt;
    std::string split_name = "all";
    extract_cmd
        ->add_option("--method", method, "random|vanilla|cot|agentic|agentic_tod|all")
        ->check(CLI::IsMember({"random", "vanilla", "cot", "agentic", "agentic_tod", "all"}));
    extract_cmd->add_option("--corpus", ext_corpus, "corpus JSONL path");
    extract_cmd->add_option("--segmented", ext_segmented, "segmented JSONL path");
    extract_cmd->add_option("--trees", ext_trees, "trees JSONL path");
    extract_cmd->add_option("--gold", ext_gold, "gold label JSONL path");
    extract_cmd->add_option("--prompt", ext_prompt, "plan prompt JSON path");
    extract_cmd->add_option("--split", split_name, "train|test|all")
        ->check(CLI::IsMember({"train", "test", "all"}));

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "score results against gold labels");
    std::vector<std::string> eval_results;
    std::string eval_gold;
    evaluate_cmd->add_option("--results", eval_results, "results JSONL file(s)")->required();
    evaluate_cmd->add_option("--gold", eval_gold, "gold label JSONL path")->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "render a stored report");
    std::string report_path;
    report_cmd->add_option("--report", report_path, "report.json path")->required();

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        PipelineConfig config = config_path.empty() ? PipelineConfig()
                                                    : PipelineConfig::from_file(config_path);
        if (!mode.empty()) config.mode = gateway_mode_from_string(mode);
        if (!fixtures.empty()) config.fixture_path = fixtures;
        if (!output_dir.empty()) config.output_dir = output_dir;
        if (!prompt_dir.empty()) config.prompt_dir = prompt_dir;
        if (seed_set) config.seed = seed;
        if (max_iterations >= 0) config.max_iterations = max_iterations;

        const fs::path default_corpus = config.output_dir / "corpus.jsonl";
        const fs::path default_segmented = config.output_dir / "segmented.jsonl";
        const fs::path default_trees = config.output_dir / "trees.jsonl";

        auto or_default = [](const std::string& value, const fs::path& fallback) {
            return value.empty() ? fallback : fs::path(value);
        };

        if (app.got_subcommand(ingest)) {
            config.validate();
            return cmd_ingest(config, ingest_inputs, delimiter);
        }
        if (app.got_subcommand(segment_cmd)) {
            config.validate();
            return cmd_segment(config, or_default(corpus_path, default_corpus));
        }
        if (app.got_subcommand(rst_import)) {
            return cmd_rst_import(config, tree_inputs);
        }
        if (app.got_subcommand(optimize_cmd)) {
            config.validate();
            return cmd_optimize(config, or_default(opt_corpus, default_corpus),
                                or_default(opt_segmented, default_segmented),
                                or_default(opt_trees, default_trees), opt_gold,
                                opt_seed_prompt);
        }
        if (app.got_subcommand(extract_cmd)) {
            if (method != "random") config.validate();
            return cmd_extract(config, method, or_default(ext_corpus, default_corpus),
                               or_default(ext_segmented, default_segmented),
                               or_default(ext_trees, default_trees), ext_gold, ext_prompt,
                               split_selection_from_string(split_name));
        }
        if (app.got_subcommand(evaluate_cmd)) {
            return cmd_evaluate(config, eval_results, eval_gold);
        }
        if (app.got_subcommand(report_cmd)) {
            return cmd_report(config, report_path);
        }
        std::cerr << R"({"error":"usage","message":"no subcommand given"})" << "\n";
        return 1;
    } catch (const std::exception& e) {
        const json err{{"error", "failure"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}

}  // namespace rhetor::cli
