#pragma once

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rhetor/detail/sha256.hpp"
#include "rhetor/detail/strings.hpp"
#include "rhetor/jsonl.hpp"

namespace rhetor {

struct Document {
    std::string id;
    std::string case_title;
    std::string case_number;
    std::optional<std::string> argued_date;   // ISO-8601
    std::optional<std::string> decided_date;  // ISO-8601
    std::string argued_date_raw;              // sidecar when unparseable
    std::string decided_date_raw;
    std::string court_name;
    std::string court_district;
    std::string court_circuit;
    std::string opinion_text;

    bool operator==(const Document&) const = default;
};

inline void to_json(json& j, const Document& d) {
    j = json{{"id", d.id},
             {"case_title", d.case_title},
             {"case_number", d.case_number},
             {"argued_date", d.argued_date ? json(*d.argued_date) : json(nullptr)},
             {"decided_date", d.decided_date ? json(*d.decided_date) : json(nullptr)},
             {"court_name", d.court_name},
             {"court_district", d.court_district},
             {"court_circuit", d.court_circuit},
             {"opinion_text", d.opinion_text}};
    if (!d.argued_date_raw.empty()) j["argued_date_raw"] = d.argued_date_raw;
    if (!d.decided_date_raw.empty()) j["decided_date_raw"] = d.decided_date_raw;
}

inline void from_json(const json& j, Document& d) {
    d.id = j.at("id").get<std::string>();
    d.case_title = j.at("case_title").get<std::string>();
    d.case_number = j.value("case_number", "");
    d.argued_date = j.contains("argued_date") && !j["argued_date"].is_null()
                        ? std::optional<std::string>(j["argued_date"].get<std::string>())
                        : std::nullopt;
    d.decided_date = j.contains("decided_date") && !j["decided_date"].is_null()
                         ? std::optional<std::string>(j["decided_date"].get<std::string>())
                         : std::nullopt;
    d.argued_date_raw = j.value("argued_date_raw", "");
    d.decided_date_raw = j.value("decided_date_raw", "");
    d.court_name = j.value("court_name", "");
    d.court_district = j.value("court_district", "");
    d.court_circuit = j.value("court_circuit", "");
    d.opinion_text = j.at("opinion_text").get<std::string>();
}

enum class CitationKind { case_ref, statute_ref };

struct Citation {
    std::string source_doc;
    CitationKind kind = CitationKind::case_ref;
    std::string target;    // normalized case reference or canonical statute key
    std::string raw_text;  // verbatim span from the opinion
    std::size_t offset = 0;

    bool operator==(const Citation&) const = default;
};

struct GraphNode {
    std::string id;
    std::string kind;  // "case" | "statute"
    std::string label;

    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    std::string src;
    std::string dst;
    std::string raw_text;
};

struct CitationGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;

    json to_json() const {
        json nodes_j = json::array();
        for (const auto& n : nodes)
            nodes_j.push_back({{"id", n.id}, {"kind", n.kind}, {"label", n.label}});
        json edges_j = json::array();
        for (const auto& e : edges)
            edges_j.push_back({{"src", e.src}, {"dst", e.dst}, {"raw_text", e.raw_text}});
        return json{{"nodes", nodes_j}, {"edges", edges_j}};
    }
};

struct Corpus {
    std::vector<Document> documents;
    // doc id -> feature id -> gold label
    std::map<std::string, std::map<std::string, bool>> gold_labels;

    const Document* find(const std::string& id) const {
        for (const auto& d : documents)
            if (d.id == id) return &d;
        return nullptr;
    }
};

class NoCasesFound : public std::runtime_error {
public:
    NoCasesFound() : std::runtime_error("input contains no case blocks") {}
};

class MissingOpinionBody : public std::runtime_error {
public:
    explicit MissingOpinionBody(const std::string& what) : std::runtime_error(what) {}
};

class DanglingSource : public std::runtime_error {
public:
    explicit DanglingSource(const std::string& doc_id)
        : std::runtime_error("citation references unknown document id: " + doc_id) {}
};

// ---------------------------------------------------------------------------
// Case splitting
// ---------------------------------------------------------------------------

struct SplitterConfig {
    std::string delimiter = "End of Document";
};

// Keeps every segment verbatim (blank ones included) so the original file can
// always be rebuilt byte-for-byte; case_blocks() exposes only the non-blank
// segments that actually hold cases.
struct SplitResult {
    std::string delimiter;
    std::vector<std::string> segments;

    std::vector<std::string> case_blocks() const {
        std::vector<std::string> blocks;
        for (const auto& s : segments)
            if (!detail::is_blank(s)) blocks.push_back(s);
        return blocks;
    }

    std::string reassemble() const {
        std::string out;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (i > 0) out += delimiter;
            out += segments[i];
        }
        return out;
    }
};

inline SplitResult split_cases(const std::string& raw_text, const SplitterConfig& splitter = {}) {
    if (splitter.delimiter.empty()) throw std::invalid_argument("splitter delimiter is empty");
    SplitResult result;
    result.delimiter = splitter.delimiter;
    result.segments = detail::split(raw_text, splitter.delimiter);
    if (result.case_blocks().empty()) throw NoCasesFound();
    return result;
}

// ---------------------------------------------------------------------------
// Metadata extraction
// ---------------------------------------------------------------------------

struct MetadataRules {
    // Each field holds ECMAScript patterns tried in order against single
    // lines; capture group 1 (or the whole match) is the value.
    std::vector<std::string> title_patterns;
    std::vector<std::string> number_patterns;
    std::vector<std::string> argued_patterns;
    std::vector<std::string> decided_patterns;
    std::vector<std::string> court_name_patterns;
    std::vector<std::string> district_patterns;
    std::vector<std::string> circuit_patterns;
    std::vector<std::string> opinion_start_patterns;  // line marking the opinion body

    static MetadataRules defaults() {
        MetadataRules r;
        r.title_patterns = {R"((\S.* v\. .*\S))"};
        r.number_patterns = {R"((?:Case No\.|Civil Action No\.|Docket No\.|No\.)\s*(\S+))"};
        r.argued_patterns = {R"(Argued:?\s+(.+))"};
        r.decided_patterns = {R"(Decided:?\s+(.+))", R"(Filed:?\s+(.+))"};
        r.court_name_patterns = {R"((United States District Court.*))",
                                 R"((United States Court of Appeals.*))"};
        r.district_patterns = {
            R"(((?:Northern|Southern|Eastern|Western|Central|Middle)\s+District\s+of\s+[A-Z][A-Za-z'. ]*[A-Za-z.]))",
            R"((District\s+of\s+[A-Z][A-Za-z'. ]*[A-Za-z.]))"};
        r.circuit_patterns = {
            R"(((?:First|Second|Third|Fourth|Fifth|Sixth|Seventh|Eighth|Ninth|Tenth|Eleventh|D\.C\.|Federal)\s+Circuit))"};
        r.opinion_start_patterns = {
            R"(^\s*(?:OPINION AND ORDER|MEMORANDUM OPINION AND ORDER|MEMORANDUM OPINION|MEMORANDUM AND ORDER|OPINION|ORDER)\s*$)"};
        return r;
    }

    static MetadataRules from_json(const json& j) {
        MetadataRules r = defaults();
        auto read = [&j](const char* key, std::vector<std::string>& out) {
            if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
        };
        read("title_patterns", r.title_patterns);
        read("number_patterns", r.number_patterns);
        read("argued_patterns", r.argued_patterns);
        read("decided_patterns", r.decided_patterns);
        read("court_name_patterns", r.court_name_patterns);
        read("district_patterns", r.district_patterns);
        read("circuit_patterns", r.circuit_patterns);
        read("opinion_start_patterns", r.opinion_start_patterns);
        return r;
    }
};

// Fixed set of accepted date spellings; anything else stays raw, never guessed.
inline std::optional<std::string> parse_date(std::string_view raw) {
    static const std::map<std::string, int> k_months = {
        {"january", 1},   {"february", 2}, {"march", 3},    {"april", 4},
        {"may", 5},       {"june", 6},     {"july", 7},     {"august", 8},
        {"september", 9}, {"october", 10}, {"november", 11}, {"december", 12},
        {"jan", 1},       {"feb", 2},      {"mar", 3},      {"apr", 4},
        {"jun", 6},       {"jul", 7},      {"aug", 8},      {"sep", 9},
        {"sept", 9},      {"oct", 10},     {"nov", 11},     {"dec", 12}};

    const std::string text(detail::trim(raw));
    auto format = [](int y, int m, int d) -> std::optional<std::string> {
        if (m < 1 || m > 12 || d < 1 || d > 31 || y < 1000 || y > 9999) return std::nullopt;
        char buf[11];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
        return std::string(buf);
    };

    std::smatch m;
    static const std::regex k_long(R"(([A-Za-z]+)\.?\s+(\d{1,2}),\s*(\d{4}))");
    if (std::regex_search(text, m, k_long)) {
        auto it = k_months.find(detail::to_lower(m[1].str()));
        if (it != k_months.end())
            return format(std::stoi(m[3]), it->second, std::stoi(m[2]));
    }
    static const std::regex k_iso(R"((\d{4})-(\d{2})-(\d{2}))");
    if (std::regex_search(text, m, k_iso))
        return format(std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3]));
    static const std::regex k_us(R"((\d{1,2})/(\d{1,2})/(\d{4}))");
    if (std::regex_search(text, m, k_us))
        return format(std::stoi(m[3]), std::stoi(m[1]), std::stoi(m[2]));
    return std::nullopt;
}

namespace detail {

inline std::optional<std::string> first_line_match(const std::string& text,
                                                   const std::vector<std::string>& patterns) {
    for (const auto& p : patterns) {
        const std::regex re(p);
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            const std::string line = text.substr(start, end - start);
            std::smatch m;
            if (std::regex_search(line, m, re))
                return std::string(trim(m.size() > 1 ? m[1].str() : m[0].str()));
            start = end + 1;
        }
    }
    return std::nullopt;
}

}  // namespace detail

inline Document extract_metadata(const std::string& raw_case,
                                 const MetadataRules& rules = MetadataRules::defaults()) {
    Document doc;
    if (auto v = detail::first_line_match(raw_case, rules.title_patterns)) doc.case_title = *v;
    if (auto v = detail::first_line_match(raw_case, rules.number_patterns)) doc.case_number = *v;
    if (auto v = detail::first_line_match(raw_case, rules.court_name_patterns))
        doc.court_name = *v;
    if (auto v = detail::first_line_match(raw_case, rules.district_patterns))
        doc.court_district = *v;
    if (auto v = detail::first_line_match(raw_case, rules.circuit_patterns))
        doc.court_circuit = *v;

    if (auto v = detail::first_line_match(raw_case, rules.argued_patterns)) {
        if (auto iso = parse_date(*v))
            doc.argued_date = *iso;
        else
            doc.argued_date_raw = *v;
    }
    if (auto v = detail::first_line_match(raw_case, rules.decided_patterns)) {
        if (auto iso = parse_date(*v))
            doc.decided_date = *iso;
        else
            doc.decided_date_raw = *v;
    }

    // Opinion body: everything after the first body marker line, or the whole
    // block when no marker is present.
    doc.opinion_text = raw_case;
    for (const auto& p : rules.opinion_start_patterns) {
        const std::regex re(p);
        std::size_t start = 0;
        bool found = false;
        while (start <= raw_case.size() && !found) {
            std::size_t end = raw_case.find('\n', start);
            if (end == std::string::npos) end = raw_case.size();
            const std::string line = raw_case.substr(start, end - start);
            if (std::regex_search(line, re)) {
                doc.opinion_text = end < raw_case.size() ? raw_case.substr(end + 1) : "";
                found = true;
            }
            start = end + 1;
        }
        if (found) break;
    }
    if (detail::is_blank(doc.opinion_text))
        throw MissingOpinionBody("no opinion text remains after header parsing for \"" +
                                 doc.case_title + "\"");

    doc.id = !doc.case_number.empty()
                 ? detail::replace_all(doc.case_number, " ", "")
                 : "doc-" + detail::Sha256::hex_digest(doc.case_title + raw_case).substr(0, 12);
    return doc;
}

// ---------------------------------------------------------------------------
// Citation extraction
// ---------------------------------------------------------------------------

struct CitationRules {
    std::vector<std::string> statute_patterns;
    std::vector<std::string> case_patterns;

    static CitationRules defaults() {
        CitationRules r;
        r.statute_patterns = {
            R"((\d+)\s+U\.\s?S\.\s?C\.\s*§§?\s*(\d+[a-z]?(?:\([0-9A-Za-z]{1,4}\))*))"};
        // Precision-first: a case citation must carry a reporter segment.
        r.case_patterns = {
            R"(([A-Z][A-Za-z0-9&.,'’\- ]{2,100}? v\. [A-Z][A-Za-z0-9&.,'’\- ]{2,100}?),\s+(\d+\s+(?:U\.S\.|S\.\s?Ct\.|F\.(?:\s?Supp\.)?(?:\s?[23]d)?|F\. App'x)\s+\d+))"};
        return r;
    }

    static CitationRules from_json(const json& j) {
        CitationRules r = defaults();
        if (j.contains("statute_patterns"))
            r.statute_patterns = j.at("statute_patterns").get<std::vector<std::string>>();
        if (j.contains("case_patterns"))
            r.case_patterns = j.at("case_patterns").get<std::vector<std::string>>();
        return r;
    }
};

// "17 U.S.C. § 504(c)(2)" -> "17USC504(c)(2)"
inline std::string canonical_statute_key(const std::string& title, const std::string& section) {
    return detail::replace_all(title, " ", "") + "USC" + detail::replace_all(section, " ", "");
}

inline std::string normalize_case_ref(const std::string& s) {
    return detail::collapse_whitespace(detail::normalize_quotes(s));
}

inline std::vector<Citation> extract_citations(const Document& doc,
                                               const CitationRules& rules = CitationRules::defaults()) {
    std::vector<Citation> citations;
    const std::string& text = doc.opinion_text;

    for (const auto& p : rules.statute_patterns) {
        const std::regex re(p);
        for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
             it != std::sregex_iterator(); ++it) {
            Citation c;
            c.source_doc = doc.id;
            c.kind = CitationKind::statute_ref;
            c.target = canonical_statute_key((*it)[1].str(), (*it)[2].str());
            c.raw_text = it->str();
            c.offset = static_cast<std::size_t>(it->position());
            citations.push_back(std::move(c));
        }
    }
    for (const auto& p : rules.case_patterns) {
        const std::regex re(p);
        for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
             it != std::sregex_iterator(); ++it) {
            Citation c;
            c.source_doc = doc.id;
            c.kind = CitationKind::case_ref;
            c.target = normalize_case_ref((*it)[1].str() + ", " + (*it)[2].str());
            c.raw_text = it->str();
            c.offset = static_cast<std::size_t>(it->position());
            citations.push_back(std::move(c));
        }
    }
    return citations;
}

// ---------------------------------------------------------------------------
// Citation graph
// ---------------------------------------------------------------------------

inline CitationGraph build_graph(const Corpus& corpus, const std::vector<Citation>& citations,
                                 std::vector<std::string>* warnings = nullptr) {
    CitationGraph graph;
    std::map<std::string, std::size_t> node_index;

    auto add_node = [&](const std::string& id, const std::string& kind,
                        const std::string& label) {
        if (node_index.count(id)) return;
        node_index[id] = graph.nodes.size();
        graph.nodes.push_back({id, kind, label});
    };

    for (const auto& doc : corpus.documents)
        add_node("case:" + doc.id, "case", doc.case_title);

    for (const auto& c : citations) {
        if (corpus.find(c.source_doc) == nullptr) throw DanglingSource(c.source_doc);
        const Document& src_doc = *corpus.find(c.source_doc);
        std::string dst_id;
        if (c.kind == CitationKind::statute_ref) {
            dst_id = "statute:" + c.target;
            add_node(dst_id, "statute", c.target);
        } else {
            // A case citing its own caption is noise, not an edge.
            const std::string own = detail::to_lower(normalize_case_ref(src_doc.case_title));
            const std::string cited = detail::to_lower(c.target);
            if (!own.empty() && cited.rfind(own, 0) == 0) {
                if (warnings)
                    warnings->push_back("dropped self-citation in " + c.source_doc + ": " +
                                        c.raw_text);
                continue;
            }
            dst_id = "case:" + c.target;
            add_node(dst_id, "case", c.target);
        }
        graph.edges.push_back({"case:" + c.source_doc, dst_id, c.raw_text});
    }
    return graph;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline void save_corpus(const fs::path& path, const Corpus& corpus) {
    std::vector<json> records;
    records.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) records.push_back(json(d));
    save_jsonl(path, records);
}

inline Corpus load_corpus(const fs::path& path) {
    Corpus corpus;
    std::size_t line_no = 0;
    for (const auto& record : load_jsonl(path)) {
        ++line_no;
        try {
            corpus.documents.push_back(record.get<Document>());
        } catch (const json::exception& e) {
            throw FormatError(std::string("bad document record: ") + e.what(), line_no);
        }
    }
    std::set<std::string> seen;
    for (const auto& d : corpus.documents)
        if (!seen.insert(d.id).second)
            throw FormatError("duplicate document id: " + d.id);
    return corpus;
}

inline void save_gold_labels(const fs::path& path,
                             const std::map<std::string, std::map<std::string, bool>>& gold) {
    std::vector<json> records;
    for (const auto& [doc_id, features] : gold)
        for (const auto& [feature_id, label] : features)
            records.push_back({{"doc_id", doc_id},
                               {"feature_id", feature_id},
                               {"label", label ? "true" : "false"}});
    save_jsonl(path, records);
}

inline std::map<std::string, std::map<std::string, bool>> load_gold_labels(const fs::path& path) {
    std::map<std::string, std::map<std::string, bool>> gold;
    std::size_t line_no = 0;
    for (const auto& record : load_jsonl(path)) {
        ++line_no;
        try {
            const std::string label = record.at("label").get<std::string>();
            if (label != "true" && label != "false")
                throw FormatError("gold label must be \"true\" or \"false\", got \"" + label +
                                      "\"",
                                  line_no);
            gold[record.at("doc_id").get<std::string>()]
                [record.at("feature_id").get<std::string>()] = (label == "true");
        } catch (const json::exception& e) {
            throw FormatError(std::string("bad gold-label record: ") + e.what(), line_no);
        }
    }
    return gold;
}

}  // namespace rhetor
