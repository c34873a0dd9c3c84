#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rhetor/corpus.hpp"
#include "rhetor/detail/strings.hpp"
#include "rhetor/gateway.hpp"
#include "rhetor/prompts.hpp"

namespace rhetor {

// The 13 functional labels; anything else must carry the NEW_ prefix.
class SectionLabel {
public:
    static const std::vector<std::string>& canonical() {
        static const std::vector<std::string> labels = {
            "Introduction",
            "Procedural History",
            "Background Facts",
            "Analysis of the Infringement",
            "Analysis of the Liability",
            "Analysis of the Relief and Damages",
            "Analysis of Attorneys' Fees",
            "Interpretation of the Law",
            "Analysis of Defenses",
            "Jurisdiction and Standing",
            "Order/Summary",
            "Supplementary Description or Case Information",
            "Analysis of Default Judgment"};
        return labels;
    }

    // Accepts a canonical label (curly quotes tolerated) or a NEW_-prefixed
    // custom label; anything else is rejected.
    static std::optional<SectionLabel> try_parse(const std::string& raw) {
        const std::string cleaned(detail::trim(detail::normalize_quotes(raw)));
        for (const auto& c : canonical())
            if (cleaned == c) return SectionLabel(cleaned);
        if (cleaned.rfind("NEW_", 0) == 0 && cleaned.size() > 4) return SectionLabel(cleaned);
        return std::nullopt;
    }

    static SectionLabel parse(const std::string& raw) {
        auto label = try_parse(raw);
        if (!label) throw std::invalid_argument("invalid section label: " + raw);
        return *label;
    }

    const std::string& value() const { return value_; }
    bool is_custom() const { return value_.rfind("NEW_", 0) == 0; }

    bool operator==(const SectionLabel&) const = default;
    auto operator<=>(const SectionLabel&) const = default;

private:
    explicit SectionLabel(std::string v) : value_(std::move(v)) {}
    std::string value_;
};

namespace labels {
inline const SectionLabel relief_and_damages =
    SectionLabel::parse("Analysis of the Relief and Damages");
inline const SectionLabel order_summary = SectionLabel::parse("Order/Summary");
inline const SectionLabel default_judgment = SectionLabel::parse("Analysis of Default Judgment");
}  // namespace labels

struct Section {
    int index = 0;  // 0-based position within the opinion
    std::string content;
    std::optional<SectionLabel> label;
};

struct SegmentedOpinion {
    std::string doc_id;
    std::vector<Section> sections;
};

// Accepted segmentations must reproduce the source text up to whitespace and
// quote normalization; the first divergent offset is in normalized space.
class ReassemblyMismatch : public std::runtime_error {
public:
    ReassemblyMismatch(std::size_t offset, const std::string& detail)
        : std::runtime_error("segmentation does not reassemble to the source text (first "
                             "divergence at normalized offset " +
                             std::to_string(offset) + "): " + detail),
          offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class InvalidLabel : public std::runtime_error {
public:
    explicit InvalidLabel(const std::string& raw)
        : std::runtime_error("model returned a label that is neither canonical nor "
                             "NEW_-prefixed: \"" +
                             raw + "\"") {}
};

inline std::string normalize_for_reassembly(const std::string& s) {
    return detail::collapse_whitespace(detail::normalize_quotes(s));
}

struct SegmentOptions {
    std::size_t max_chunk_chars = 48000;  // opinions above this are pre-chunked
    int max_repair_attempts = 2;
};

namespace detail {

inline std::size_t first_divergence(const std::string& a, const std::string& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
        if (a[i] != b[i]) return i;
    return n;
}

inline void check_reassembly(const std::string& source, const std::vector<Section>& sections) {
    std::string joined;
    for (const auto& s : sections) {
        if (!joined.empty()) joined.push_back(' ');
        joined += s.content;
    }
    const std::string got = normalize_for_reassembly(joined);
    const std::string want = normalize_for_reassembly(source);
    if (got != want) {
        const std::size_t at = first_divergence(got, want);
        const std::string context_got = got.substr(at, 40);
        const std::string context_want = want.substr(at, 40);
        throw ReassemblyMismatch(at, "got \"" + context_got + "...\", expected \"" +
                                         context_want + "...\"");
    }
}

// Greedy paragraph packing; a lone oversized paragraph becomes its own chunk.
inline std::vector<std::string> chunk_paragraphs(const std::string& text,
                                                 std::size_t max_chars) {
    std::vector<std::string> chunks;
    std::string current;
    for (const auto& para : split(text, "\n\n")) {
        if (!current.empty() && current.size() + para.size() + 2 > max_chars) {
            chunks.push_back(current);
            current.clear();
        }
        if (!current.empty()) current += "\n\n";
        current += para;
    }
    if (!is_blank(current)) chunks.push_back(current);
    if (chunks.empty()) chunks.push_back(text);
    return chunks;
}

inline std::vector<Section> segment_chunk(const std::string& chunk, Gateway& gateway,
                                          const prompts::Library& library,
                                          const SegmentOptions& options) {
    CompletionRequest request;
    request.messages.push_back(
        {Role::user,
         library.render("section_segmentation",
                        {{"Section Label Definitions", library.get("section_label_definitions")},
                         {"Judicial Opinion", chunk}})});

    JsonSchemaDescriptor schema;
    schema.fields.push_back({"result", JsonSchemaDescriptor::Kind::array, {}, true});
    const json parsed = gateway.complete_json(request, schema, options.max_repair_attempts);

    std::vector<Section> sections;
    for (const auto& item : parsed.at("result")) {
        if (!item.is_object() || !item.contains("index") || !item.contains("content") ||
            !item["content"].is_string())
            throw SchemaViolation("segmentation item is not {index, content}", {parsed.dump()});
        Section s;
        s.index = item["index"].is_number_integer() ? item["index"].get<int>()
                                                    : static_cast<int>(sections.size());
        s.content = item["content"].get<std::string>();
        if (is_blank(s.content))
            throw SchemaViolation("segmentation produced an empty section", {parsed.dump()});
        sections.push_back(std::move(s));
    }
    if (sections.empty())
        throw SchemaViolation("segmentation produced no sections", {parsed.dump()});
    std::stable_sort(sections.begin(), sections.end(),
                     [](const Section& a, const Section& b) { return a.index < b.index; });
    check_reassembly(chunk, sections);
    return sections;
}

}  // namespace detail

// Splits one opinion into contiguous sections (labels unset). Opinions larger
// than the chunk budget are segmented per paragraph-aligned chunk and the
// section lists concatenated.
inline SegmentedOpinion segment(const Document& doc, Gateway& gateway,
                                const prompts::Library& library = prompts::Library::builtin(),
                                const SegmentOptions& options = {}) {
    if (detail::is_blank(doc.opinion_text))
        throw std::invalid_argument("document " + doc.id + " has no opinion text");

    SegmentedOpinion out;
    out.doc_id = doc.id;
    const std::vector<std::string> chunks =
        doc.opinion_text.size() > options.max_chunk_chars
            ? detail::chunk_paragraphs(doc.opinion_text, options.max_chunk_chars)
            : std::vector<std::string>{doc.opinion_text};
    for (const auto& chunk : chunks) {
        for (auto& s : detail::segment_chunk(chunk, gateway, library, options)) {
            s.index = static_cast<int>(out.sections.size());
            out.sections.push_back(std::move(s));
        }
    }
    return out;
}

// Assigns one of the 13 labels (or a NEW_ custom label) to a single section.
// An unknown bare label gets exactly one repair round-trip before failing.
inline SectionLabel label_section(const std::string& full_text, const Section& section,
                                  Gateway& gateway,
                                  const prompts::Library& library = prompts::Library::builtin(),
                                  std::vector<std::string>* warnings = nullptr,
                                  int max_repair_attempts = 2) {
    const json task{{"full", full_text}, {"target_section", section.content}};
    CompletionRequest request;
    request.messages.push_back(
        {Role::user,
         library.render("section_labeling",
                        {{"Section Label Definitions", library.get("section_label_definitions")},
                         {"Section Content", task.dump()}})});

    JsonSchemaDescriptor schema;
    schema.fields.push_back({"result", JsonSchemaDescriptor::Kind::string, {}, true});

    std::string raw;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const json parsed = gateway.complete_json(request, schema, max_repair_attempts);
        raw = parsed.at("result").get<std::string>();
        if (auto label = SectionLabel::try_parse(raw)) {
            if (label->is_custom() && warnings)
                warnings->push_back("custom section label accepted: " + label->value());
            return *label;
        }
        request.messages.push_back({Role::assistant, raw});
        request.messages.push_back(
            {Role::user,
             "Assign one of the predefined labels exactly as listed, or a custom label "
             "prefixed with \"NEW_\"."});
    }
    throw InvalidLabel(raw);
}

// Stable filter: output is a subsequence of the input sections.
inline std::vector<Section> select_sections(const SegmentedOpinion& seg,
                                            const std::set<SectionLabel>& wanted) {
    std::vector<Section> out;
    for (const auto& s : seg.sections)
        if (s.label && wanted.count(*s.label)) out.push_back(s);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: JSONL of {doc_id, sections: [{index, label, content}]}
// ---------------------------------------------------------------------------

inline json segmented_to_json(const SegmentedOpinion& seg) {
    json sections = json::array();
    for (const auto& s : seg.sections)
        sections.push_back({{"index", s.index},
                            {"label", s.label ? json(s.label->value()) : json(nullptr)},
                            {"content", s.content}});
    return json{{"doc_id", seg.doc_id}, {"sections", sections}};
}

inline SegmentedOpinion segmented_from_json(const json& j) {
    SegmentedOpinion seg;
    seg.doc_id = j.at("doc_id").get<std::string>();
    for (const auto& item : j.at("sections")) {
        Section s;
        s.index = item.at("index").get<int>();
        s.content = item.at("content").get<std::string>();
        if (item.contains("label") && !item["label"].is_null())
            s.label = SectionLabel::parse(item["label"].get<std::string>());
        seg.sections.push_back(std::move(s));
    }
    return seg;
}

inline void save_segmented(const fs::path& path, const std::vector<SegmentedOpinion>& all) {
    std::vector<json> records;
    records.reserve(all.size());
    for (const auto& seg : all) records.push_back(segmented_to_json(seg));
    save_jsonl(path, records);
}

inline std::vector<SegmentedOpinion> load_segmented(const fs::path& path) {
    std::vector<SegmentedOpinion> all;
    for (const auto& record : load_jsonl(path)) all.push_back(segmented_from_json(record));
    return all;
}

}  // namespace rhetor
