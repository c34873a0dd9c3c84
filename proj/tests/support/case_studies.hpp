#pragma once

// Shared fixtures: three damages opinions with known gold labels, scripted
// model behavior for every pipeline call, and helpers to record the replay
// fixture those scripts produce.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rhetor/corpus.hpp"
#include "rhetor/discourse.hpp"
#include "rhetor/extraction.hpp"
#include "rhetor/gateway.hpp"
#include "rhetor/sectioning.hpp"

namespace rhetor::testsupport {

// ---------------------------------------------------------------------------
// Scripted transport
// ---------------------------------------------------------------------------

class FailingTransport : public Transport {
public:
    json send(const json&) override {
        throw NetworkError("network access attempted in a hermetic test");
    }
};

struct ScriptedRule {
    std::vector<std::string> contains;
    std::vector<std::string> not_contains;
    std::function<std::string(const std::string& all_text)> respond;
};

// Matches rules in registration order against the concatenated message
// contents; unmatched requests fail loudly with the request text.
class ScriptedTransport : public Transport {
public:
    void when(std::vector<std::string> contains, std::string response,
              std::vector<std::string> not_contains = {}) {
        rules_.push_back({std::move(contains), std::move(not_contains),
                          [response = std::move(response)](const std::string&) {
                              return response;
                          }});
    }

    void when_fn(std::vector<std::string> contains,
                 std::function<std::string(const std::string&)> respond,
                 std::vector<std::string> not_contains = {}) {
        rules_.push_back({std::move(contains), std::move(not_contains), std::move(respond)});
    }

    json send(const json& body) override {
        std::string all;
        for (const auto& m : body.at("messages"))
            all += m.at("content").get<std::string>() + "\n";
        for (const auto& rule : rules_) {
            bool ok = true;
            for (const auto& needle : rule.contains)
                ok = ok && all.find(needle) != std::string::npos;
            for (const auto& needle : rule.not_contains)
                ok = ok && all.find(needle) == std::string::npos;
            if (ok) return chat_response_body(rule.respond(all), 0, 0);
        }
        throw NetworkError("no scripted response for request starting with: " +
                           all.substr(0, 160));
    }

private:
    std::vector<ScriptedRule> rules_;
};

// ---------------------------------------------------------------------------
// Case studies
// ---------------------------------------------------------------------------

struct CaseStudy {
    std::string id;
    std::string title;
    std::string case_number;
    std::string court_line;
    std::string decided_line;
    std::string marker;  // phrase unique to this case, present in the opinion
    std::vector<std::pair<std::string, std::string>> sections;  // (label, content)
    std::vector<std::string> damages_edus;  // EDUs of the damages section
    bool gold = false;
    // Scripted verdicts per method.
    bool vanilla_verdict = false;
    bool cot_verdict = false;
    bool agentic_verdict = false;
    bool tod_verdict = false;
    std::string vanilla_reasoning;
    std::string cot_text;  // free-form output ending in a JSON verdict
    std::string agentic_reasoning;
    std::string tod_reasoning;
    std::vector<int> tod_evidence_edus;
    RstNode tree_root;

    std::string opinion_text() const {
        std::string out;
        for (const auto& [label, content] : sections) {
            if (!out.empty()) out += "\n\n";
            out += content;
        }
        return out;
    }
};

namespace detail {

inline RstNode leaf(int id, Nuclearity n, std::string relation) {
    RstNode node;
    node.lo = node.hi = id;
    node.nuclearity = n;
    node.relation = std::move(relation);
    return node;
}

inline RstNode internal(int lo, int hi, std::optional<Nuclearity> n, std::string relation,
                        std::vector<RstNode> children) {
    RstNode node;
    node.lo = lo;
    node.hi = hi;
    node.nuclearity = n;
    node.relation = std::move(relation);
    node.children = std::move(children);
    return node;
}

}  // namespace detail

inline std::vector<CaseStudy> case_studies() {
    using detail::internal;
    using detail::leaf;
    std::vector<CaseStudy> cases;

    {
        CaseStudy c;
        c.title = "IO Group, Inc. v. Jordon";
        c.case_number = "C-10-0038";
        c.id = "C-10-0038";
        c.court_line = "United States District Court, Northern District of California";
        c.decided_line = "Decided: June 14, 2010";
        c.marker = "IO Group";
        c.damages_edus = {
            "Plaintiff seeks enhanced statutory damages under 17 U.S.C. § 504(c)(2),",
            "asserting that Defendant's infringement of the moving picture works was willful.",
            "The Court acknowledges that willful infringement may support an increased award",
            "where punishment and deterrence of future misconduct are warranted.",
            "Based on these relevant circumstances, an award on the lower end of the scale "
            "would have the desired deterrent effect for someone in Defendant's position.",
            "Accordingly, the Court awards statutory damages of $1,500 per moving picture "
            "copyright infringed and $750 per photo trademark infringed, for a total of "
            "$21,750."};
        std::string damages;
        for (const auto& e : c.damages_edus) {
            if (!damages.empty()) damages += " ";
            damages += e;
        }
        c.sections = {
            {"Introduction",
             "IO Group, Inc. brought this action against Antoine Jordon for copyright and "
             "trademark infringement after Jordon distributed the company's works without "
             "authorization."},
            {"Analysis of the Relief and Damages", damages},
            {"Order/Summary",
             "Judgment is entered for Plaintiff in the amount of $21,750. IT IS SO ORDERED."}};
        c.gold = true;
        c.vanilla_verdict = true;
        c.cot_verdict = false;
        c.agentic_verdict = false;
        c.tod_verdict = true;
        c.vanilla_reasoning =
            "The court weighed enhanced statutory damages under 17 U.S.C. § 504(c)(2) for "
            "willful infringement and tied the award to deterrence, which signals a punitive "
            "component.";
        c.cot_text =
            "The court acknowledged willfulness but chose an award at the low end of the "
            "statutory scale. Because it declined enhancement, the damages read as "
            "compensatory.\n"
            "{\"label\": \"false\", \"reasoning\": \"The court opted against enhanced "
            "statutory damages despite acknowledging willfulness, so the award does not go "
            "beyond compensation.\"}";
        c.agentic_reasoning =
            "The $21,750 award sits within the standard statutory range and the court "
            "declined enhancement, so no punitive component attaches.";
        c.tod_reasoning =
            "The discourse structure links the willfulness finding to punishment and "
            "deterrence before the award is set: the deterrent purpose stated in the damages "
            "analysis gives the award a punitive component even though the amount stays low.";
        c.tod_evidence_edus = {4, 5};
        c.tree_root = internal(
            1, 6, std::nullopt, "",
            {internal(1, 2, Nuclearity::satellite, "background",
                      {leaf(1, Nuclearity::nucleus, "span"),
                       leaf(2, Nuclearity::satellite, "explanation")}),
             internal(3, 6, Nuclearity::nucleus, "span",
                      {internal(3, 4, Nuclearity::satellite, "evidence",
                                {leaf(3, Nuclearity::nucleus, "span"),
                                 leaf(4, Nuclearity::satellite, "purpose")}),
                       internal(5, 6, Nuclearity::nucleus, "span",
                                {leaf(5, Nuclearity::satellite, "justify"),
                                 leaf(6, Nuclearity::nucleus, "span")})})});
        cases.push_back(std::move(c));
    }

    {
        CaseStudy c;
        c.title = "G&G Prod. v. Rivan";
        c.case_number = "2:21-cv-00291";
        c.id = "2:21-cv-00291";
        c.court_line = "United States District Court, Eastern District of Michigan";
        c.decided_line = "Decided: March 8, 2022";
        c.marker = "Rivan";
        c.damages_edus = {
            "The Court finds that the evidence submitted in support of the motion for default "
            "judgment adequately establishes that Defendant's infringement was willful.",
            "Defendant continued to sell the fitness kits after receiving cease and desist "
            "letters.",
            "At a price of less than $100.00 per fitness kit, Defendant has generated at most "
            "$4,500 in sales.",
            "In light of these facts, the Court will award Plaintiff statutory damages in the "
            "amount of $30,000.",
            "The award falls within the range authorized by 17 U.S.C. § 504(c)(1)."};
        std::string damages;
        for (const auto& e : c.damages_edus) {
            if (!damages.empty()) damages += " ";
            damages += e;
        }
        c.sections = {
            {"Introduction",
             "G&G Productions brought this action against Rivan after Defendant continued to "
             "sell infringing fitness kits despite repeated warnings."},
            {"Analysis of the Relief and Damages", damages},
            {"Order/Summary",
             "Plaintiff is awarded $30,000 in statutory damages. IT IS SO ORDERED."}};
        c.gold = false;
        c.vanilla_verdict = true;
        c.cot_verdict = true;
        c.agentic_verdict = true;
        c.tod_verdict = false;
        c.vanilla_reasoning =
            "The court awarded $30,000 for willful infringement, well above the $4,500 in "
            "sales, suggesting an intent to punish and deter.";
        c.cot_text =
            "The infringement was willful and the award far exceeds the proven sales, which "
            "points to deterrence.\n"
            "{\"label\": \"true\", \"reasoning\": \"The $30,000 award exceeds the actual harm "
            "and follows a willfulness finding, which reads as punitive.\"}";
        c.agentic_reasoning =
            "The willfulness finding together with an award well above the demonstrated sales "
            "indicates a punitive purpose aimed at deterring continued infringement.";
        c.tod_reasoning =
            "Although the infringement was willful, the discourse path from the award "
            "statement shows the court grounding the amount in the sales facts, never "
            "connecting it to punishment or deterrence, and the award stays within the "
            "standard statutory range.";
        c.tod_evidence_edus = {4};
        c.tree_root = internal(
            1, 5, std::nullopt, "",
            {internal(1, 2, Nuclearity::satellite, "background",
                      {leaf(1, Nuclearity::nucleus, "span"),
                       leaf(2, Nuclearity::satellite, "evidence")}),
             internal(3, 5, Nuclearity::nucleus, "span",
                      {leaf(3, Nuclearity::satellite, "circumstance"),
                       internal(4, 5, Nuclearity::nucleus, "span",
                                {leaf(4, Nuclearity::nucleus, "span"),
                                 leaf(5, Nuclearity::satellite, "elaboration")})})});
        cases.push_back(std::move(c));
    }

    {
        CaseStudy c;
        c.title = "Photo Res. Hawai'i, Inc. v. Am. Hawai'i Travel, Inc.";
        c.case_number = "07-00134";
        c.id = "07-00134";
        c.court_line = "United States District Court, District of Hawaii";
        c.decided_line = "Decided: November 5, 2007";
        c.marker = "Photo Resource";
        c.damages_edus = {
            "The Copyright Act provides that where infringement was committed willfully, the "
            "court in its discretion may increase the award of statutory damages to a sum of "
            "not more than $150,000 under 17 U.S.C. § 504(c).",
            "Plaintiff requests $18,000 in statutory damages under the Copyright Act,",
            "three times the amount that Plaintiff would have received had AHTI obtained a "
            "license to use the eight photographic works.",
            "Plaintiff has established that AHTI wilfully infringed upon Plaintiff's "
            "copyrights.",
            "This Court therefore finds that Plaintiff's request for $18,000.00 in statutory "
            "damages under the Copyright Act is appropriate under the circumstances."};
        std::string damages;
        for (const auto& e : c.damages_edus) {
            if (!damages.empty()) damages += " ";
            damages += e;
        }
        c.sections = {
            {"Introduction",
             "Photo Resource Hawaii, Inc. sued American Hawaii Travel, Inc. for using eight "
             "photographic works on its website without a license."},
            {"Analysis of the Relief and Damages", damages},
            {"Order/Summary",
             "The Court awards Plaintiff $18,000 in statutory damages. IT IS SO ORDERED."}};
        c.gold = false;
        c.vanilla_verdict = true;
        c.cot_verdict = true;
        c.agentic_verdict = true;
        c.tod_verdict = true;
        c.vanilla_reasoning =
            "The $18,000 award is three times the license fee and follows a willfulness "
            "finding, which suggests deterrent intent.";
        c.cot_text =
            "The award triples the license fee the defendant avoided and the court found the "
            "infringement willful.\n"
            "{\"label\": \"true\", \"reasoning\": \"Tripling the avoided license fee after a "
            "willfulness finding points to punishment and deterrence.\"}";
        c.agentic_reasoning =
            "Awarding three times the licensing fee after finding willful infringement "
            "indicates an intent to deter future violations.";
        c.tod_reasoning =
            "The discourse path ties the discretionary enhancement provision of 17 U.S.C. § "
            "504(c) and the willfulness finding to the tripled award, which reads as a "
            "deterrence-driven, punitive amount.";
        c.tod_evidence_edus = {1, 5};
        c.tree_root = internal(
            1, 5, std::nullopt, "",
            {leaf(1, Nuclearity::satellite, "background"),
             internal(2, 5, Nuclearity::nucleus, "span",
                      {internal(2, 3, Nuclearity::satellite, "circumstance",
                                {leaf(2, Nuclearity::nucleus, "span"),
                                 leaf(3, Nuclearity::satellite, "elaboration")}),
                       internal(4, 5, Nuclearity::nucleus, "span",
                                {leaf(4, Nuclearity::satellite, "evidence"),
                                 leaf(5, Nuclearity::nucleus, "span")})})});
        cases.push_back(std::move(c));
    }
    return cases;
}

// ---------------------------------------------------------------------------
// Derived artifacts
// ---------------------------------------------------------------------------

inline Document case_document(const CaseStudy& c) {
    Document d;
    d.id = c.id;
    d.case_title = c.title;
    d.case_number = c.case_number;
    d.court_name = c.court_line;
    d.opinion_text = c.opinion_text();
    return d;
}

inline Corpus case_corpus() {
    Corpus corpus;
    for (const auto& c : case_studies()) {
        corpus.documents.push_back(case_document(c));
        corpus.gold_labels[c.id]["punitive_component"] = c.gold;
    }
    return corpus;
}

inline SegmentedOpinion case_segmented(const CaseStudy& c) {
    SegmentedOpinion seg;
    seg.doc_id = c.id;
    int index = 0;
    for (const auto& [label, content] : c.sections) {
        Section s;
        s.index = index++;
        s.content = content;
        s.label = SectionLabel::parse(label);
        seg.sections.push_back(std::move(s));
    }
    return seg;
}

inline RstTree case_tree(const CaseStudy& c) {
    RstTree tree;
    tree.doc_id = c.id;
    for (std::size_t i = 0; i < c.damages_edus.size(); ++i)
        tree.edus.push_back({static_cast<int>(i) + 1, c.damages_edus[i]});
    tree.root = c.tree_root;
    validate_tree(tree);
    return tree;
}

// One raw ingest file holding all three cases, reproducing opinion_text
// byte-for-byte through the metadata extractor (body follows the OPINION
// marker line).
inline std::string raw_case_file(const std::string& delimiter = "End of Document") {
    std::string out;
    bool first = true;
    for (const auto& c : case_studies()) {
        if (!first) out += "\n" + delimiter + "\n";
        first = false;
        out += c.title + "\n";
        out += "No. " + c.case_number + "\n";
        out += c.court_line + "\n";
        out += c.decided_line + "\n";
        out += "OPINION\n";
        out += c.opinion_text();
    }
    out += "\n" + delimiter + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Scripted model behavior
// ---------------------------------------------------------------------------

inline std::string verdict_json(bool verdict, const std::string& reasoning,
                                const std::vector<int>& evidence_edus = {}) {
    json j{{"label", verdict ? "true" : "false"}, {"reasoning", reasoning}};
    if (!evidence_edus.empty()) j["evidence_edus"] = evidence_edus;
    return j.dump();
}

inline std::unique_ptr<ScriptedTransport> make_scripted_transport() {
    auto transport = std::make_unique<ScriptedTransport>();

    // Shared plan and agent plumbing.
    transport->when({"Write a short ordered plan"},
                    json{{"steps",
                          {"Locate the damages discussion and the statutory basis for the "
                           "award.",
                           "Check whether willfulness is explicitly connected to punishment "
                           "or deterrence.",
                           "Decide the label from the connected findings."}}}
                        .dump());
    transport->when_fn({"executing one step of an extraction plan"},
                       [](const std::string& all) {
                           const std::string tag = "Plan step:\n";
                           const std::size_t at = all.find(tag);
                           std::string step = at == std::string::npos
                                                  ? std::string("step")
                                                  : all.substr(at + tag.size(), 60);
                           const std::size_t cut = step.find('\n');
                           if (cut != std::string::npos) step = step.substr(0, cut);
                           return "Finding for \"" + step +
                                  "\": reviewed the damages discussion in the materials.";
                       });
    transport->when({"reviewing your own extraction work"},
                    json{{"consistent", true}, {"issue", ""}}.dump());

    // Path verbalization: deterministic function of the target span.
    transport->when_fn(
        {"Rhetorical Structure Theory (RST)", "The target text span is:"},
        [](const std::string& all) {
            const std::string tag = "The target text span is:\n";
            const std::size_t at = all.find(tag);
            std::string target =
                at == std::string::npos ? std::string("the span") : all.substr(at + tag.size());
            const std::size_t cut = target.find("\n\n");
            if (cut != std::string::npos) target = target.substr(0, cut);
            if (target.size() > 90) target = target.substr(0, 90);
            return "The segment \"" + target +
                   "\" feeds the damages analysis: it supports the court's assessment of "
                   "whether the award carries punitive weight.";
        });

    for (const auto& c : case_studies()) {
        // Segmentation: return the authored sections verbatim.
        json sections = json::array();
        for (std::size_t i = 0; i < c.sections.size(); ++i)
            sections.push_back(
                {{"index", static_cast<int>(i)}, {"content", c.sections[i].second}});
        transport->when({"segment the legal case", c.marker},
                        json{{"result", sections}}.dump());

        // Labeling: keyed on the target_section payload prefix.
        for (const auto& [label, content] : c.sections) {
            const std::string prefix = content.substr(0, 40);
            transport->when({"assign the most appropriate label",
                             "\"target_section\":\"" + prefix},
                            json{{"result", label}}.dump());
        }

        // Verdicts. Rule order matters: CoT before vanilla.
        transport->when({"Let's think step by step.", c.marker}, c.cot_text);
        transport->when({"Based on the provided judicial opinion", c.marker,
                         "Findings from the plan steps:"},
                        verdict_json(c.agentic_verdict, c.agentic_reasoning));
        transport->when({"Based on the provided judicial opinion", c.marker},
                        verdict_json(c.vanilla_verdict, c.vanilla_reasoning),
                        {"Findings from the plan steps:", "Let's think step by step."});
        transport->when({"Based on the provided excerpts", c.marker,
                         "Findings from the plan steps:"},
                        verdict_json(c.tod_verdict, c.tod_reasoning, c.tod_evidence_edus));
    }
    return transport;
}

// Records every exchange the full pipeline makes over the case studies into
// `fixture_path`, so replay runs need no scripting at all.
inline void record_case_fixture(const fs::path& fixture_path) {
    if (fs::exists(fixture_path)) fs::remove(fixture_path);
    GatewayConfig config;
    config.mode = GatewayMode::record;
    config.fixture_path = fixture_path;
    config.requests_per_second = 0.0;
    Gateway gateway(config, make_scripted_transport());

    const FeatureDefinition feature = FeatureDefinition::punitive_component();
    const PlanPrompt seed = make_seed_prompt(feature);
    for (const auto& c : case_studies()) {
        const Document doc = case_document(c);

        SegmentedOpinion seg = segment(doc, gateway);
        for (auto& s : seg.sections) s.label = label_section(doc.opinion_text, s, gateway);

        const RstTree tree = case_tree(c);
        run_vanilla(doc, feature, gateway);
        run_cot(doc, feature, gateway);
        run_agentic(doc, feature, seed, gateway);
        run_agentic_tod(doc, seg, tree, feature, seed, gateway);
    }
}

}  // namespace rhetor::testsupport
