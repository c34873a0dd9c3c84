#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rhetor/jsonl.hpp"

namespace rhetor::prompts {

// ---------------------------------------------------------------------------
// Template texts. The pipeline templates use {{Name}} placeholders and are
// also materialized as text files (see write_templates); files win over the
// embedded copies when a template directory is configured.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSectionLabelDefinitions =
    R"PT(1. Introduction: Provides an overview of the case, including the nature of the dispute and the parties involved.
2. Procedural History: Summarizes the sequence of legal actions and rulings leading up to the current decision.
3. Background Facts: Presents the factual context and events that gave rise to the legal dispute.
4. Analysis of the Infringement: Evaluates whether a copyright infringement occurred based on the presented facts and legal standards.
5. Analysis of the Liability: Determines who is legally responsible for the alleged infringement or harm.
6. Analysis of the Relief and Damages: Describes the judge's assessment of the remedies awarded, including monetary damages or injunctive relief.
7. Analysis of Attorneys' Fees: Considers whether attorney's fees should be granted and under what justification.
8. Interpretation of the Law: Explains how specific legal statutes or precedents are understood and applied in this case.
9. Analysis of Defenses: Reviews and evaluates the validity of defenses raised by the defendant, such as fair use or license.
10. Jurisdiction and Standing: Determines whether the court has the authority to hear the case and whether the parties have the right to bring the action.
11. Order/Summary: Announces the court's final judgment, summarizes the opinion, or issues a directive resolving the case.
12. Supplementary Description or Case Information: Provides any additional case-related information included by the judge.
13. Analysis of Default Judgment: Evaluates whether default judgment is procedurally justified based on the defendant's failure to respond and relevant legal standards.)PT";

inline constexpr std::string_view kSectionSegmentation =
    R"PT(You are a detail-oriented legal analyst specializing in copyright infringement cases, trained to segment judicial texts into topically coherent sections. You follow legal writing conventions and apply labels consistently and accurately, without altering the text.

Your task is to segment the legal case about copyright infringement into topically coherent sections.

Step 1: Segment the text
1.1 Read the text linearly, sentence by sentence.
1.2 Segment the case into sections by identifying topical transitions—points where the focus of discussion changes.
1.3 Each section must consist of a contiguous block of text. Do not combine sentences from non-adjacent parts of the document.
1.4 If adjacent paragraphs belong to the same topic, group them into a single section.

While you are not required to label the topic of each section, you may refer to the following topics commonly found in copyright infringement cases:
{{Section Label Definitions}}

Step 2: Output formatting
2.1 Preserve the original sentence order from the input.
2.2 Do not alter, skip, rephrase, or merge non-adjacent content.
2.3 Output the result in the following JSON format:
{"result": [{"index": SECTION_INDEX, "content": "..."}, {"index": SECTION_INDEX, "content": "..."}]}
2.4 Ensure all special characters are properly escaped.
2.5 Do not include code block markers.
2.6 Output only the JSON object and nothing else.

The document:
{{Judicial Opinion}})PT";

inline constexpr std::string_view kSectionLabeling =
    R"PT(You are a detail-oriented legal analyst specializing in copyright infringement cases, trained to analyze the structure of legal cases. You follow legal writing conventions and apply labels consistently and accurately, without altering the text.

Your task is to assign the most appropriate label to a topically coherent section from a copyright infringement case.

Step 1: Assign a label to each section
1.1 You will be given the full text of the judge's opinion and a section extracted from it, formatted as:
{"full":"...", "target_section":"..."}
1.2 Read the text linearly, sentence by sentence.
1.3 Assign the most appropriate label from the following list to the target section:
["Introduction", "Procedural History", "Background Facts", "Analysis of the Infringement", "Analysis of the Liability", "Analysis of the Relief and Damages", "Analysis of Attorneys' Fees", "Interpretation of the Law", "Analysis of Defenses", "Jurisdiction and Standing", "Order/Summary", "Supplementary Description or Case Information", "Analysis of Default Judgment"]
1.4 Only if the section clearly does not fit any of the predefined labels, assign a custom label prefixed with "NEW_". For example: "NEW_Discussion".

You can refer to the following definition of each label:
{{Section Label Definitions}}

Step 2: Output formatting
2.1 Output the result in the following JSON format:
{"result": "SECTION_LABEL"}
2.2 Ensure all special characters are properly escaped.
2.3 Do not include code block markers.
2.4 Output only the JSON object and nothing else.

The task:
{{Section Content}})PT";

inline constexpr std::string_view kVerdictVanilla =
    R"PT(You are a legal analyst. Based on the provided judicial opinion, determine whether the judge granted damages that explicitly or functionally include a punitive component.

A punitive component includes damages that go beyond compensation and are intended to punish the defendant or deter future misconduct. This may include:
1. Enhanced statutory damages explicitly awarded under 17 U.S.C. § 504(c)(2) for willful infringement with a stated purpose of punishment or deterrence;
2. Damages calculated to meaningfully exceed actual harm, when justified by the court as necessary to deter future violations.

Important clarification:
1. The term "punitive damages" does not need to appear explicitly.
2. However, willfulness or maliciousness alone is not sufficient. These terms must be explicitly connected to punishment or deterrence in the court's reasoning.
3. Do not assign a punitive label if the damages are within the standard statutory range and there is no stated punitive or deterrent intent.

Respond in the following JSON format:
{
  "label": "true" | "false" | "not addressed",
  "reasoning": "A brief explanation of why this label applies."
}
Do not include markdown code block markers or commentary.

Judicial Opinion:
{{Judicial Opinion}})PT";

inline constexpr std::string_view kVerdictCot =
    R"PT(You are a legal analyst. Based on the provided judicial opinion, determine whether the judge granted damages that explicitly or functionally include a punitive component.

A punitive component includes damages that go beyond compensation and are intended to punish the defendant or deter future misconduct. This may include:
1. Enhanced statutory damages explicitly awarded under 17 U.S.C. § 504(c)(2) for willful infringement with a stated purpose of punishment or deterrence;
2. Damages calculated to meaningfully exceed actual harm, when justified by the court as necessary to deter future violations.

Important clarification:
1. The term "punitive damages" does not need to appear explicitly.
2. However, willfulness or maliciousness alone is not sufficient. These terms must be explicitly connected to punishment or deterrence in the court's reasoning.
3. Do not assign a punitive label if the damages are within the standard statutory range and there is no stated punitive or deterrent intent.

Judicial Opinion:
{{Judicial Opinion}}

Append your final judgment after your thought in the following JSON format:
{
  "label": "true" | "false" | "not addressed",
  "reasoning": "A brief explanation of why this label applies."
}

Let's think step by step.)PT";

inline constexpr std::string_view kVerdictTod =
    R"PT(You are a legal analyst. Based on the provided excerpts from a judicial opinion, determine whether the judge granted damages that explicitly or functionally include a punitive component.

A punitive component includes damages that go beyond compensation and are intended to punish the defendant or deter future misconduct. This may include:
1. Enhanced statutory damages explicitly awarded under 17 U.S.C. § 504(c)(2) for willful infringement with a stated purpose of punishment or deterrence;
2. Damages calculated to meaningfully exceed actual harm, when justified by the court as necessary to deter future violations.

Important clarification:
1. The term "punitive damages" does not need to appear explicitly.
2. However, willfulness or maliciousness alone is not sufficient. These terms must be explicitly connected to punishment or deterrence in the court's reasoning.
3. Do not assign a punitive label if the damages are within the standard statutory range and there is no stated punitive or deterrent intent.

Respond in the following JSON format:
{
  "label": "true" | "false" | "not addressed",
  "reasoning": "A brief explanation of why this label applies."
}
Do not include markdown code block markers or commentary.

Relevant Sections:
{{Judicial Opinion}}

Discourse-Supported Explanations:
{{Linearized Tree-Of-Discourse}})PT";

inline constexpr std::string_view kPathVerbalization =
    R"PT(You are a helpful legal assistant. A legal opinion has been segmented using Rhetorical Structure Theory (RST).

Below is the rhetorical subtree from the root of the document to the text span of interest.
Each arrow represents a rhetorical relation from a segment to its parent:
{{Tree-Of-Discourse}}

The target text span is:
{{Target Text Span}}

Please generate a clear yet concise explanation of how this segment contributes to the larger structure of the legal opinion, specifically, on determining whether punitive damage was considered when granting damage award. The explanation should not exceed 150 words. Use natural language, and reflect the rhetorical flow from the segment upward.

Following is an explanation example:
The segment "to prevent or restrain infringement of a copyright" states the purpose of "as it may deem reasonable," which itself elaborates on the broader legal authority granted in "The Copyright Act authorizes district courts to grant temporary and final injunctions..." This structure shows how the specific enforcement mechanism supports the general legal power granted to courts.)PT";

inline constexpr std::string_view kPlanSeed =
    R"PT(You are a legal analyst planning how to decide the following feature for a judicial opinion.

Feature definition:
{{Feature Definition}}

Write a short ordered plan for deciding the feature from the materials you will be given (opinion sections and, when available, discourse-structure explanations). Each step must name what to locate in the materials and how the finding bears on the decision.

Respond in the following JSON format:
{"steps": ["...", "..."]}
Do not include markdown code block markers or commentary.)PT";

inline constexpr std::string_view kPlanRevision =
    R"PT(You are improving a planning prompt for a legal feature-extraction task.

Feature definition:
{{Feature Definition}}

Current planning prompt:
{{Current Prompt}}

Plans produced by this prompt led to incorrect extractions on the following training cases:
{{Failures}}

Rewrite the planning prompt to resolve these mistakes while keeping correct behavior unchanged. Respond with the full revised prompt text only, no commentary.)PT";

inline constexpr std::string_view kStepExecution =
    R"PT(You are a legal analyst executing one step of an extraction plan over a judicial opinion.

Plan step:
{{Plan Step}}

Materials:
{{Materials}}

Notes from earlier steps:
{{Notes}}

Report what this step finds, in two or three sentences.)PT";

inline constexpr std::string_view kReflection =
    R"PT(You are reviewing your own extraction work for internal consistency.

Verdict under review:
{{Verdict}}

Step findings:
{{Notes}}

Does the verdict follow from the findings without contradiction? Respond in the following JSON format:
{"consistent": true | false, "issue": "one sentence describing the problem, or an empty string"}
Do not include markdown code block markers or commentary.)PT";

// ---------------------------------------------------------------------------

// Substitutes {{Name}} placeholders; unresolved placeholders are an error so
// template/caller drift fails loudly instead of leaking braces into prompts.
inline std::string render(std::string_view tpl, const std::map<std::string, std::string>& vars) {
    std::string out(tpl);
    for (const auto& [name, value] : vars) {
        const std::string needle = "{{" + name + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(needle, pos)) != std::string::npos) {
            out.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    const std::size_t open = out.find("{{");
    if (open != std::string::npos) {
        const std::size_t close = out.find("}}", open);
        if (close != std::string::npos && close - open <= 64)
            throw std::invalid_argument("unresolved template placeholder: " +
                                        out.substr(open, close - open + 2));
    }
    return out;
}

struct NamedTemplate {
    std::string name;  // file stem
    std::string_view text;
};

inline const std::vector<NamedTemplate>& all_templates() {
    static const std::vector<NamedTemplate> templates = {
        {"section_label_definitions", kSectionLabelDefinitions},
        {"section_segmentation", kSectionSegmentation},
        {"section_labeling", kSectionLabeling},
        {"verdict_vanilla", kVerdictVanilla},
        {"verdict_cot", kVerdictCot},
        {"verdict_tod", kVerdictTod},
        {"path_verbalization", kPathVerbalization},
        {"plan_seed", kPlanSeed},
        {"plan_revision", kPlanRevision},
        {"step_execution", kStepExecution},
        {"reflection", kReflection},
    };
    return templates;
}

// Template source: embedded defaults, optionally shadowed by *.txt files in a
// directory so prompts can be tweaked without rebuilding.
class Library {
public:
    Library() {
        for (const auto& t : all_templates()) texts_[t.name] = std::string(t.text);
    }

    static Library builtin() { return Library(); }

    static Library from_directory(const fs::path& dir) {
        Library lib;
        if (!fs::is_directory(dir))
            throw IoError("template directory does not exist: " + dir.string());
        for (auto& [name, text] : lib.texts_) {
            const fs::path file = dir / (name + ".txt");
            if (!fs::exists(file)) continue;
            std::string loaded = read_text_file(file);
            // Files end with one newline that is not part of the template.
            if (loaded.ends_with('\n')) loaded.pop_back();
            if (loaded.ends_with('\r')) loaded.pop_back();
            text = std::move(loaded);
        }
        return lib;
    }

    const std::string& get(const std::string& name) const {
        auto it = texts_.find(name);
        if (it == texts_.end()) throw std::invalid_argument("unknown prompt template: " + name);
        return it->second;
    }

    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& vars) const {
        return prompts::render(get(name), vars);
    }

private:
    std::map<std::string, std::string> texts_;
};

inline void write_templates(const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& t : all_templates())
        atomic_write_text(dir / (t.name + ".txt"), std::string(t.text) + "\n");
}

}  // namespace rhetor::prompts
