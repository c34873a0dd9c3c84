#pragma once

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rhetor/corpus.hpp"
#include "rhetor/detail/strings.hpp"
#include "rhetor/discourse.hpp"
#include "rhetor/gateway.hpp"
#include "rhetor/prompts.hpp"
#include "rhetor/sectioning.hpp"

namespace rhetor {

enum class FeatureLabel { yes, no, not_addressed };

inline std::string to_wire(FeatureLabel l) {
    switch (l) {
        case FeatureLabel::yes: return "true";
        case FeatureLabel::no: return "false";
        case FeatureLabel::not_addressed: return "not addressed";
    }
    return "false";
}

inline FeatureLabel feature_label_from_wire(const std::string& s) {
    if (s == "true") return FeatureLabel::yes;
    if (s == "false") return FeatureLabel::no;
    if (s == "not addressed" || s == "not_addressed") return FeatureLabel::not_addressed;
    throw std::invalid_argument("unknown feature label: " + s);
}

enum class Method { random, vanilla, cot, agentic, agentic_tod };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::random: return "random";
        case Method::vanilla: return "vanilla";
        case Method::cot: return "cot";
        case Method::agentic: return "agentic";
        case Method::agentic_tod: return "agentic_tod";
    }
    return "vanilla";
}

inline Method method_from_string(const std::string& s) {
    if (s == "random") return Method::random;
    if (s == "vanilla") return Method::vanilla;
    if (s == "cot") return Method::cot;
    if (s == "agentic") return Method::agentic;
    if (s == "agentic_tod" || s == "tod") return Method::agentic_tod;
    throw std::invalid_argument("unknown method: " + s);
}

struct FeatureDefinition {
    std::string id;
    std::string name;
    std::string definition_text;

    static FeatureDefinition punitive_component() {
        FeatureDefinition f;
        f.id = "punitive_component";
        f.name = "Whether Punitive Damage Is Considered When Granting Damage Award";
        f.definition_text =
            R"(A punitive component includes damages that go beyond compensation and are intended to punish the defendant or deter future misconduct. This may include:
1. Enhanced statutory damages explicitly awarded under 17 U.S.C. § 504(c)(2) for willful infringement with a stated purpose of punishment or deterrence;
2. Damages calculated to meaningfully exceed actual harm, when justified by the court as necessary to deter future violations.

Important clarification:
1. The term "punitive damages" does not need to appear explicitly.
2. However, willfulness or maliciousness alone is not sufficient. These terms must be explicitly connected to punishment or deterrence in the court's reasoning.
3. Do not assign a punitive label if the damages are within the standard statutory range and there is no stated punitive or deterrent intent.)";
        return f;
    }
};

struct PlanPrompt {
    std::string feature_id;
    int version = 0;
    std::string text;
    std::optional<int> parent_version;
    std::string revision_rationale;
};

inline PlanPrompt make_seed_prompt(const FeatureDefinition& feature,
                                   const prompts::Library& library = prompts::Library::builtin()) {
    PlanPrompt p;
    p.feature_id = feature.id;
    p.version = 0;
    p.text = library.render("plan_seed", {{"Feature Definition", feature.definition_text}});
    return p;
}

struct Plan {
    std::string feature_id;
    std::vector<std::string> steps;
};

struct ExtractionResult {
    std::string doc_id;
    std::string feature_id;
    FeatureLabel label = FeatureLabel::no;
    std::string reasoning;
    std::optional<RstSubtree> evidence;  // agentic_tod only
    Method method = Method::vanilla;
};

class VerdictNotFound : public std::runtime_error {
public:
    VerdictNotFound() : std::runtime_error("model output contains no JSON verdict object") {}
};

class PlanEmpty : public std::runtime_error {
public:
    PlanEmpty() : std::runtime_error("model produced a plan with no steps") {}
};

struct ExtractionOptions {
    int max_repair_attempts = 2;
    bool one_call_per_step = true;       // executor granularity
    std::size_t max_context_chars = 48000;
    int candidate_edu_cap = 12;
    std::set<SectionLabel> wanted_sections = {labels::relief_and_damages,
                                              labels::order_summary};
};

// ---------------------------------------------------------------------------
// Verdict parsing
// ---------------------------------------------------------------------------

namespace detail {

inline const JsonSchemaDescriptor& verdict_schema() {
    static const JsonSchemaDescriptor schema = [] {
        JsonSchemaDescriptor s;
        s.fields.push_back({"label",
                            JsonSchemaDescriptor::Kind::string,
                            {"true", "false", "not addressed"},
                            true});
        s.fields.push_back({"reasoning", JsonSchemaDescriptor::Kind::string, {}, true});
        return s;
    }();
    return schema;
}

// Last balanced top-level {...} block in free-form text that parses and
// carries a "label" key.
inline std::optional<json> last_verdict_object(const std::string& text) {
    std::optional<json> last;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        int depth = 0;
        bool in_string = false, escaped = false;
        std::size_t end = std::string::npos;
        for (std::size_t k = i; k < text.size(); ++k) {
            const char c = text[k];
            if (escaped) {
                escaped = false;
                continue;
            }
            if (in_string && c == '\\') {
                escaped = true;
                continue;
            }
            if (c == '"') {
                in_string = !in_string;
            } else if (!in_string && c == '{') {
                ++depth;
            } else if (!in_string && c == '}') {
                if (--depth == 0) {
                    end = k;
                    break;
                }
            }
        }
        if (end == std::string::npos) continue;
        try {
            json j = json::parse(text.substr(i, end - i + 1));
            if (j.is_object() && j.contains("label")) {
                last = std::move(j);
                i = end;
            }
        } catch (const json::parse_error&) {
        }
    }
    return last;
}

// Long opinions are summarized chunk by chunk before the verdict call.
inline std::string fit_to_context(const std::string& opinion, Gateway& gateway,
                                  const ExtractionOptions& options,
                                  std::vector<std::string>* warnings) {
    if (opinion.size() <= options.max_context_chars) return opinion;
    if (warnings)
        warnings->push_back("opinion exceeds context budget (" + std::to_string(opinion.size()) +
                            " chars); using chunk summaries");
    std::string condensed;
    for (const auto& chunk : chunk_paragraphs(opinion, options.max_context_chars)) {
        CompletionRequest request;
        request.messages.push_back(
            {Role::user,
             "Summarize the following portion of a judicial opinion, preserving every statement "
             "about damages, willfulness, deterrence, and statutory provisions:\n\n" +
                 chunk});
        if (!condensed.empty()) condensed += "\n\n";
        condensed += gateway.complete(request).text;
    }
    return condensed;
}

inline ExtractionResult verdict_from_json(const json& verdict, const Document& doc,
                                          const FeatureDefinition& feature, Method method) {
    ExtractionResult result;
    result.doc_id = doc.id;
    result.feature_id = feature.id;
    result.method = method;
    result.label = feature_label_from_wire(verdict.at("label").get<std::string>());
    result.reasoning = verdict.value("reasoning", "");
    return result;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Baseline strategies
// ---------------------------------------------------------------------------

inline ExtractionResult run_vanilla(const Document& doc, const FeatureDefinition& feature,
                                    Gateway& gateway,
                                    const prompts::Library& library = prompts::Library::builtin(),
                                    const ExtractionOptions& options = {},
                                    std::vector<std::string>* warnings = nullptr) {
    if (detail::is_blank(doc.opinion_text))
        throw std::invalid_argument("document " + doc.id + " has no opinion text");
    const std::string opinion =
        detail::fit_to_context(doc.opinion_text, gateway, options, warnings);
    CompletionRequest request;
    request.messages.push_back(
        {Role::user, library.render("verdict_vanilla", {{"Judicial Opinion", opinion}})});
    const json verdict =
        gateway.complete_json(request, detail::verdict_schema(), options.max_repair_attempts);
    return detail::verdict_from_json(verdict, doc, feature, Method::vanilla);
}

inline ExtractionResult run_cot(const Document& doc, const FeatureDefinition& feature,
                                Gateway& gateway,
                                const prompts::Library& library = prompts::Library::builtin(),
                                const ExtractionOptions& options = {},
                                std::vector<std::string>* warnings = nullptr) {
    if (detail::is_blank(doc.opinion_text))
        throw std::invalid_argument("document " + doc.id + " has no opinion text");
    const std::string opinion =
        detail::fit_to_context(doc.opinion_text, gateway, options, warnings);
    CompletionRequest request;
    request.messages.push_back(
        {Role::user, library.render("verdict_cot", {{"Judicial Opinion", opinion}})});
    const CompletionResponse response = gateway.complete(request);

    const auto verdict = detail::last_verdict_object(response.text);
    if (!verdict) throw VerdictNotFound();
    ExtractionResult result = detail::verdict_from_json(*verdict, doc, feature, Method::cot);
    if (result.reasoning.empty()) {
        // Keep the free-form thinking when the JSON carries no reasoning.
        const std::size_t at = response.text.find(verdict->dump().substr(0, 1));
        result.reasoning = std::string(detail::trim(response.text.substr(0, at)));
        if (result.reasoning.empty()) result.reasoning = response.text;
    }
    return result;
}

inline std::vector<ExtractionResult> run_random(const std::vector<std::string>& doc_ids,
                                                const std::string& feature_id, double p_positive,
                                                unsigned seed) {
    if (p_positive < 0.0 || p_positive > 1.0)
        throw std::invalid_argument("p_positive must lie in [0,1]");
    std::mt19937 gen(seed);
    std::vector<ExtractionResult> results;
    results.reserve(doc_ids.size());
    for (const auto& id : doc_ids) {
        // mt19937 output is standardized, so this draw is portable.
        const double r = static_cast<double>(gen()) / 4294967296.0;
        ExtractionResult result;
        result.doc_id = id;
        result.feature_id = feature_id;
        result.method = Method::random;
        result.label = r < p_positive ? FeatureLabel::yes : FeatureLabel::no;
        results.push_back(std::move(result));
    }
    return results;
}

// ---------------------------------------------------------------------------
// Agentic strategies
// ---------------------------------------------------------------------------

namespace detail {

inline Plan generate_plan(const FeatureDefinition& feature, const PlanPrompt& prompt,
                          Gateway& gateway, const ExtractionOptions& options,
                          const std::string& replan_note = "") {
    CompletionRequest request;
    request.messages.push_back({Role::user, prompt.text});
    if (!replan_note.empty()) request.messages.push_back({Role::user, replan_note});

    JsonSchemaDescriptor schema;
    schema.fields.push_back({"steps", JsonSchemaDescriptor::Kind::array, {}, true});

    for (int attempt = 0; attempt < 2; ++attempt) {
        const json parsed =
            gateway.complete_json(request, schema, options.max_repair_attempts);
        Plan plan;
        plan.feature_id = feature.id;
        for (const auto& s : parsed.at("steps"))
            if (s.is_string() && !is_blank(s.get<std::string>()))
                plan.steps.push_back(s.get<std::string>());
        if (!plan.steps.empty()) return plan;
        request.messages.push_back({Role::assistant, parsed.dump()});
        request.messages.push_back({Role::user, "The plan must contain at least one step."});
    }
    throw PlanEmpty();
}

inline std::vector<std::string> execute_plan(const Plan& plan, const std::string& materials,
                                             Gateway& gateway, const prompts::Library& library,
                                             const ExtractionOptions& options) {
    std::vector<std::string> notes;
    if (!options.one_call_per_step) {
        std::string all_steps;
        for (std::size_t i = 0; i < plan.steps.size(); ++i)
            all_steps += std::to_string(i + 1) + ". " + plan.steps[i] + "\n";
        CompletionRequest request;
        request.messages.push_back(
            {Role::user, library.render("step_execution", {{"Plan Step", all_steps},
                                                           {"Materials", materials},
                                                           {"Notes", "(none)"}})});
        notes.push_back(gateway.complete(request).text);
        return notes;
    }
    for (const auto& step : plan.steps) {
        std::string prior = "(none)";
        if (!notes.empty()) {
            prior.clear();
            for (const auto& n : notes) prior += "- " + n + "\n";
        }
        CompletionRequest request;
        request.messages.push_back(
            {Role::user, library.render("step_execution", {{"Plan Step", step},
                                                           {"Materials", materials},
                                                           {"Notes", prior}})});
        notes.push_back(gateway.complete(request).text);
    }
    return notes;
}

inline std::string join_notes(const std::vector<std::string>& notes) {
    std::string out;
    for (const auto& n : notes) out += "- " + n + "\n";
    return out.empty() ? "(none)" : out;
}

inline json verdict_call(const std::string& verdict_prompt, const std::vector<std::string>& notes,
                         Gateway& gateway, const ExtractionOptions& options) {
    CompletionRequest request;
    request.messages.push_back({Role::user, verdict_prompt});
    request.messages.push_back(
        {Role::user, "Findings from the plan steps:\n" + join_notes(notes)});
    return gateway.complete_json(request, verdict_schema(), options.max_repair_attempts);
}

// One bounded reflection pass; returns the issue text when the model reports
// an inconsistency.
inline std::optional<std::string> reflect(const json& verdict,
                                          const std::vector<std::string>& notes, Gateway& gateway,
                                          const prompts::Library& library,
                                          const ExtractionOptions& options) {
    CompletionRequest request;
    request.messages.push_back(
        {Role::user, library.render("reflection", {{"Verdict", verdict.dump()},
                                                   {"Notes", join_notes(notes)}})});
    JsonSchemaDescriptor schema;
    schema.fields.push_back({"consistent", JsonSchemaDescriptor::Kind::boolean, {}, true});
    schema.fields.push_back({"issue", JsonSchemaDescriptor::Kind::string, {}, false});
    const json check = gateway.complete_json(request, schema, options.max_repair_attempts);
    if (check.at("consistent").get<bool>()) return std::nullopt;
    return check.value("issue", "unspecified inconsistency");
}

}  // namespace detail

inline ExtractionResult run_agentic(const Document& doc, const FeatureDefinition& feature,
                                    const PlanPrompt& prompt, Gateway& gateway,
                                    const prompts::Library& library = prompts::Library::builtin(),
                                    const ExtractionOptions& options = {},
                                    std::vector<std::string>* warnings = nullptr) {
    if (detail::is_blank(doc.opinion_text))
        throw std::invalid_argument("document " + doc.id + " has no opinion text");
    const std::string opinion =
        detail::fit_to_context(doc.opinion_text, gateway, options, warnings);
    const std::string verdict_prompt =
        library.render("verdict_vanilla", {{"Judicial Opinion", opinion}});

    Plan plan = detail::generate_plan(feature, prompt, gateway, options);
    std::vector<std::string> notes =
        detail::execute_plan(plan, opinion, gateway, library, options);
    json verdict = detail::verdict_call(verdict_prompt, notes, gateway, options);

    if (auto issue = detail::reflect(verdict, notes, gateway, library, options)) {
        plan = detail::generate_plan(feature, prompt, gateway, options,
                                     "Your previous plan led to an inconsistent result: " +
                                         *issue + " Produce a corrected plan.");
        notes = detail::execute_plan(plan, opinion, gateway, library, options);
        verdict = detail::verdict_call(verdict_prompt, notes, gateway, options);
    }
    return detail::verdict_from_json(verdict, doc, feature, Method::agentic);
}

// Candidate EDUs for discourse explanations: those appearing inside the
// selected sections, ranked by damages-related keywords.
inline std::vector<int> candidate_edus(const SegmentedOpinion& seg, const RstTree& tree,
                                       const ExtractionOptions& options = {}) {
    static const std::vector<std::string> k_keywords = {
        "statutory damages", "punitive", "deter",   "willful",
        "504(c)",            "§ 504",    "damages", "$"};

    std::string selected_text;
    for (const auto& s : select_sections(seg, options.wanted_sections))
        selected_text += normalize_for_reassembly(s.content) + " ";
    const bool restrict_to_sections = !detail::is_blank(selected_text);

    std::vector<std::pair<int, int>> scored;  // (score, id)
    for (const auto& edu : tree.edus) {
        const std::string normalized = normalize_for_reassembly(edu.text);
        if (restrict_to_sections && selected_text.find(normalized) == std::string::npos)
            continue;
        const std::string lowered = detail::to_lower(normalized);
        int score = 0;
        for (const auto& kw : k_keywords) {
            std::size_t pos = 0;
            while ((pos = lowered.find(detail::to_lower(kw), pos)) != std::string::npos) {
                ++score;
                pos += kw.size();
            }
        }
        scored.push_back({score, edu.id});
    }
    if (scored.empty())
        for (const auto& edu : tree.edus) scored.push_back({0, edu.id});

    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> ids;
    for (const auto& [score, id] : scored) {
        ids.push_back(id);
        if (static_cast<int>(ids.size()) >= options.candidate_edu_cap) break;
    }
    return ids;
}

inline ExtractionResult run_agentic_tod(const Document& doc, const SegmentedOpinion& seg,
                                        const RstTree& tree, const FeatureDefinition& feature,
                                        const PlanPrompt& prompt, Gateway& gateway,
                                        const prompts::Library& library =
                                            prompts::Library::builtin(),
                                        const ExtractionOptions& options = {},
                                        std::vector<std::string>* warnings = nullptr) {
    if (seg.sections.empty())
        throw std::invalid_argument("document " + doc.id + " has no segmented sections");

    std::vector<Section> relevant = select_sections(seg, options.wanted_sections);
    if (relevant.empty()) relevant = seg.sections;  // never send an empty excerpt
    std::string sections_text;
    for (const auto& s : relevant) {
        if (!sections_text.empty()) sections_text += "\n\n";
        sections_text += s.content;
    }

    std::string explanations;
    for (int id : candidate_edus(seg, tree, options)) {
        const LinearizedPath path = path_to_root(tree, id);
        const std::string verbal =
            verbalize(path, tree, tree.edu(id).text, gateway, library, warnings);
        explanations += "[EDU " + std::to_string(id) + "] " + verbal + "\n";
    }

    const std::string verdict_prompt = library.render(
        "verdict_tod", {{"Judicial Opinion", sections_text},
                        {"Linearized Tree-Of-Discourse",
                         explanations.empty() ? std::string("(none)") : explanations}});
    const std::string materials =
        "Relevant Sections:\n" + sections_text + "\n\nDiscourse-Supported Explanations:\n" +
        (explanations.empty() ? std::string("(none)") : explanations);

    Plan plan = detail::generate_plan(feature, prompt, gateway, options);
    std::vector<std::string> notes =
        detail::execute_plan(plan, materials, gateway, library, options);
    json verdict = detail::verdict_call(verdict_prompt, notes, gateway, options);

    if (auto issue = detail::reflect(verdict, notes, gateway, library, options)) {
        plan = detail::generate_plan(feature, prompt, gateway, options,
                                     "Your previous plan led to an inconsistent result: " +
                                         *issue + " Produce a corrected plan.");
        notes = detail::execute_plan(plan, materials, gateway, library, options);
        verdict = detail::verdict_call(verdict_prompt, notes, gateway, options);
    }

    ExtractionResult result =
        detail::verdict_from_json(verdict, doc, feature, Method::agentic_tod);

    // Evidence subtree: EDU ids cited by the model, else EDUs whose text the
    // reasoning quotes verbatim.
    std::set<int> cited;
    if (verdict.contains("evidence_edus") && verdict["evidence_edus"].is_array())
        for (const auto& v : verdict["evidence_edus"])
            if (v.is_number_integer()) {
                const int id = v.get<int>();
                if (id >= 1 && id <= static_cast<int>(tree.edus.size())) cited.insert(id);
            }
    if (cited.empty()) {
        const std::string reasoning_norm = normalize_for_reassembly(result.reasoning);
        for (const auto& edu : tree.edus)
            if (reasoning_norm.find(normalize_for_reassembly(edu.text)) != std::string::npos)
                cited.insert(edu.id);
    }
    if (!cited.empty()) {
        result.evidence = extract_subtree(tree, cited);
    } else if (warnings) {
        warnings->push_back("evidence unresolved for " + doc.id +
                            ": reasoning cites no locatable span");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Plan optimizer
// ---------------------------------------------------------------------------

struct DocBundle {
    Document doc;
    SegmentedOpinion seg;
    RstTree tree;
};

struct TrainExample {
    DocBundle bundle;
    bool gold = false;
};

struct OptimizationBudget {
    int max_iterations = 8;
    int minibatch_size = 0;  // 0 = full training set
};

struct OptimizationFailure {
    std::string doc_id;
    std::string predicted;
    std::string gold;
    std::string model_reasoning;
};

struct OptimizationIteration {
    int prompt_version = 0;
    double train_accuracy = 0.0;
    std::vector<OptimizationFailure> failures;
    std::string revision_text;  // revision evaluated in this iteration, if any
    bool accepted = true;
};

struct OptimizationTrace {
    std::string feature_id;
    std::vector<OptimizationIteration> iterations;
    bool budget_exhausted = false;

    double best_accuracy() const {
        double best = 0.0;
        for (const auto& it : iterations) best = std::max(best, it.train_accuracy);
        return best;
    }

    json to_json() const {
        json iters = json::array();
        for (const auto& it : iterations) {
            json fails = json::array();
            for (const auto& f : it.failures)
                fails.push_back({{"doc_id", f.doc_id},
                                 {"predicted", f.predicted},
                                 {"gold", f.gold},
                                 {"model_reasoning", f.model_reasoning}});
            iters.push_back({{"prompt_version", it.prompt_version},
                             {"train_accuracy", it.train_accuracy},
                             {"failures", fails},
                             {"revision_text", it.revision_text},
                             {"accepted", it.accepted}});
        }
        return json{{"feature_id", feature_id},
                    {"iterations", iters},
                    {"budget_exhausted", budget_exhausted}};
    }
};

using PlanExecutor = std::function<ExtractionResult(
    const DocBundle&, const FeatureDefinition&, const PlanPrompt&, Gateway&)>;

inline PlanExecutor default_tod_executor(const prompts::Library& library,
                                         const ExtractionOptions& options) {
    return [&library, options](const DocBundle& bundle, const FeatureDefinition& feature,
                               const PlanPrompt& prompt, Gateway& gateway) {
        return run_agentic_tod(bundle.doc, bundle.seg, bundle.tree, feature, prompt, gateway,
                               library, options);
    };
}

namespace detail {

struct MinibatchEval {
    double accuracy = 0.0;
    std::vector<OptimizationFailure> failures;
};

inline MinibatchEval evaluate_prompt(const std::vector<const TrainExample*>& batch,
                                     const FeatureDefinition& feature, const PlanPrompt& prompt,
                                     Gateway& gateway, const PlanExecutor& executor) {
    MinibatchEval eval;
    int correct = 0;
    for (const TrainExample* example : batch) {
        const ExtractionResult result =
            executor(example->bundle, feature, prompt, gateway);
        const bool predicted_positive = result.label == FeatureLabel::yes;
        if (predicted_positive == example->gold) {
            ++correct;
        } else {
            eval.failures.push_back({example->bundle.doc.id, to_wire(result.label),
                                     example->gold ? "true" : "false", result.reasoning});
        }
    }
    eval.accuracy = batch.empty() ? 0.0 : static_cast<double>(correct) /
                                              static_cast<double>(batch.size());
    return eval;
}

inline std::string format_failures(const std::vector<OptimizationFailure>& failures) {
    std::string out;
    for (const auto& f : failures) {
        out += "- document " + f.doc_id + ": predicted " + f.predicted + ", gold " + f.gold;
        if (!f.model_reasoning.empty()) out += "; model reasoning: " + f.model_reasoning;
        out += "\n";
    }
    return out;
}

}  // namespace detail

// Greedy accept-if-not-worse refinement of the plan-generation prompt against
// gold labels. Returns the best prompt by training accuracy (lowest version
// wins ties) plus the full audit trace.
inline std::pair<PlanPrompt, OptimizationTrace> optimize(
    const FeatureDefinition& feature, const std::vector<TrainExample>& train,
    const PlanPrompt& seed_prompt, const OptimizationBudget& budget, Gateway& gateway,
    const prompts::Library& library = prompts::Library::builtin(),
    const ExtractionOptions& options = {}, PlanExecutor executor = nullptr) {
    if (train.empty()) throw std::invalid_argument("optimize needs a non-empty training set");
    if (!executor) executor = default_tod_executor(library, options);

    OptimizationTrace trace;
    trace.feature_id = feature.id;
    if (budget.max_iterations <= 0) {
        trace.budget_exhausted = true;  // returned unoptimized
        return {seed_prompt, trace};
    }

    std::vector<const TrainExample*> batch;
    const std::size_t batch_size = budget.minibatch_size > 0
                                       ? std::min<std::size_t>(
                                             static_cast<std::size_t>(budget.minibatch_size),
                                             train.size())
                                       : train.size();
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(&train[i]);

    PlanPrompt current = seed_prompt;
    detail::MinibatchEval current_eval =
        detail::evaluate_prompt(batch, feature, current, gateway, executor);
    trace.iterations.push_back(
        {current.version, current_eval.accuracy, current_eval.failures, "", true});

    PlanPrompt best = current;
    double best_accuracy = current_eval.accuracy;

    int iterations_used = 0;
    while (current_eval.accuracy < 1.0 && iterations_used < budget.max_iterations) {
        ++iterations_used;

        CompletionRequest request;
        request.messages.push_back(
            {Role::user,
             library.render("plan_revision",
                            {{"Feature Definition", feature.definition_text},
                             {"Current Prompt", current.text},
                             {"Failures", detail::format_failures(current_eval.failures)}})});
        const std::string revision_text = gateway.complete(request).text;

        PlanPrompt candidate;
        candidate.feature_id = feature.id;
        candidate.version = current.version + 1;
        candidate.text = revision_text;
        candidate.parent_version = current.version;
        candidate.revision_rationale = detail::format_failures(current_eval.failures);

        const detail::MinibatchEval candidate_eval =
            detail::evaluate_prompt(batch, feature, candidate, gateway, executor);
        const bool accepted = candidate_eval.accuracy >= current_eval.accuracy;
        trace.iterations.push_back({candidate.version, candidate_eval.accuracy,
                                    candidate_eval.failures, revision_text, accepted});
        if (accepted) {
            current = candidate;
            current_eval = candidate_eval;
            if (current_eval.accuracy > best_accuracy) {
                best = current;
                best_accuracy = current_eval.accuracy;
            }
        }
    }
    trace.budget_exhausted =
        current_eval.accuracy < 1.0 && iterations_used >= budget.max_iterations;
    return {best, trace};
}

// ---------------------------------------------------------------------------
// Result persistence: JSONL of {doc_id, feature_id, method, label, reasoning,
// evidence?}
// ---------------------------------------------------------------------------

inline json result_to_json(const ExtractionResult& r) {
    json j{{"doc_id", r.doc_id},
           {"feature_id", r.feature_id},
           {"method", to_string(r.method)},
           {"label", to_wire(r.label)},
           {"reasoning", r.reasoning}};
    if (r.evidence) {
        json covered = json::array();
        for (int id : r.evidence->covered_edus) covered.push_back(id);
        j["evidence"] = json{{"root", detail::node_to_json(r.evidence->root, false)},
                             {"covered_edus", covered}};
    }
    return j;
}

inline ExtractionResult result_from_json(const json& j) {
    ExtractionResult r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.feature_id = j.at("feature_id").get<std::string>();
    r.method = method_from_string(j.at("method").get<std::string>());
    r.label = feature_label_from_wire(j.at("label").get<std::string>());
    r.reasoning = j.value("reasoning", "");
    if (j.contains("evidence")) {
        RstSubtree subtree;
        const json& root = j["evidence"].at("root");
        subtree.root = detail::node_from_json(root, true, "evidence.root");
        if (root.contains("nuclearity"))
            subtree.root.nuclearity =
                nuclearity_from_string(root["nuclearity"].get<std::string>());
        for (const auto& id : j["evidence"].at("covered_edus"))
            subtree.covered_edus.insert(id.get<int>());
        r.evidence = std::move(subtree);
    }
    return r;
}

inline void save_results(const fs::path& path, const std::vector<ExtractionResult>& results) {
    std::vector<json> records;
    records.reserve(results.size());
    for (const auto& r : results) records.push_back(result_to_json(r));
    save_jsonl(path, records);
}

inline std::vector<ExtractionResult> load_results(const fs::path& path) {
    std::vector<ExtractionResult> results;
    for (const auto& record : load_jsonl(path)) results.push_back(result_from_json(record));
    return results;
}

}  // namespace rhetor
