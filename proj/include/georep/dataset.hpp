#pragma once

// Parallel-problem data model and the line-delimited dataset format.
//
// One JSON object per line:
//   {"id": "...", "source": "NCERT", "category": "AreaVolume",
//    "gold_answer": "3/2", "euclidean": "...", "coordinate": "...",
//    "vector": "..."}
// Optional flags: "opaque_gold" (gold is free text outside the answer
// grammar) and "exact_decimal" (a decimal gold is the exact value).

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "georep/canon.hpp"
#include "georep/core.hpp"
#include "georep/digest.hpp"

namespace georep {

enum class Source : std::uint8_t { NCERT, RDSharma, RSAggarwal, Custom };
enum class Category : std::uint8_t { LengthDistance, AreaVolume, RatioProportion, AngleDirection };

inline std::string_view to_string(Source s) {
    switch (s) {
        case Source::NCERT: return "NCERT";
        case Source::RDSharma: return "RDSharma";
        case Source::RSAggarwal: return "RSAggarwal";
        case Source::Custom: return "Custom";
    }
    return "?";
}

inline std::string_view to_string(Category c) {
    switch (c) {
        case Category::LengthDistance: return "LengthDistance";
        case Category::AreaVolume: return "AreaVolume";
        case Category::RatioProportion: return "RatioProportion";
        case Category::AngleDirection: return "AngleDirection";
    }
    return "?";
}

inline std::optional<Source> source_from_string(std::string_view s) {
    for (auto v : {Source::NCERT, Source::RDSharma, Source::RSAggarwal, Source::Custom})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

inline std::optional<Category> category_from_string(std::string_view s) {
    for (auto v : {Category::LengthDistance, Category::AreaVolume, Category::RatioProportion,
                   Category::AngleDirection})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

struct Problem {
    std::string id;
    Source source = Source::Custom;
    Category category = Category::LengthDistance;  // metadata only
    std::string gold_answer;
    bool opaque_gold = false;
    bool exact_decimal = false;
    std::map<Representation, std::string> variants;

    const std::string& variant(Representation r) const {
        static const std::string kEmpty;
        auto it = variants.find(r);
        return it == variants.end() ? kEmpty : it->second;
    }
};

// ─── Validation ───────────────────────────────────────────────────────────

enum class ViolationKind : std::uint8_t { MissingVariant, EmptyVariant, GoldUnparseable, GoldNotExact };

inline std::string_view to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::MissingVariant: return "missing variant";
        case ViolationKind::EmptyVariant: return "empty variant";
        case ViolationKind::GoldUnparseable: return "gold answer does not parse";
        case ViolationKind::GoldNotExact: return "gold answer not exact";
    }
    return "?";
}

struct Violation {
    ViolationKind kind;
    std::string detail;
};

struct ValidationReport {
    std::string problem_id;
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(ViolationKind k) const {
        return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
    }
};

namespace detail {

inline bool mentions_approximation(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (std::string_view marker : {"approx", "about", "around", "roughly", "~", "\xE2\x89\x88" /* ≈ */})
        if (lower.find(marker) != std::string::npos) return true;
    return false;
}

inline bool contains_decimal(const canon::AnswerExpr& e) {
    if (e.kind == canon::ExprKind::Decimal) return true;
    return std::any_of(e.args.begin(), e.args.end(), [](const auto& a) { return contains_decimal(a); });
}

}  // namespace detail

inline ValidationReport validate_problem(const Problem& p) {
    ValidationReport report{p.id, {}};
    for (Representation r : kRepresentations) {
        auto it = p.variants.find(r);
        if (it == p.variants.end()) {
            report.violations.push_back({ViolationKind::MissingVariant, std::string(to_key(r))});
        } else if (it->second.find_first_not_of(" \t\r\n") == std::string::npos) {
            report.violations.push_back({ViolationKind::EmptyVariant, std::string(to_key(r))});
        }
    }
    if (p.opaque_gold) return report;
    if (detail::mentions_approximation(p.gold_answer)) {
        report.violations.push_back({ViolationKind::GoldNotExact, p.gold_answer});
        return report;
    }
    try {
        const auto expr = canon::parse_answer(p.gold_answer);
        (void)canon::canonicalize(expr);
        if (detail::contains_decimal(expr) && !p.exact_decimal)
            report.violations.push_back({ViolationKind::GoldNotExact, "bare decimal without exact_decimal flag"});
    } catch (const Error& e) {
        report.violations.push_back({ViolationKind::GoldUnparseable, e.what()});
    }
    return report;
}

// ─── Problem sets ─────────────────────────────────────────────────────────

struct Manifest {
    std::string name;
    std::string version;
    std::string checksum;  // SHA-256 of the raw file bytes
};

inline constexpr std::string_view kDatasetFormatVersion = "georep-problems/1";

struct ProblemSet {
    std::vector<Problem> problems;  // file order
    Manifest manifest;
    std::vector<ValidationReport> reports;  // parallel to problems

    std::size_t size() const { return problems.size(); }

    const Problem* find(std::string_view id) const {
        for (const auto& p : problems)
            if (p.id == id) return &p;
        return nullptr;
    }

    std::optional<std::size_t> index_of(std::string_view id) const {
        for (std::size_t i = 0; i < problems.size(); ++i)
            if (problems[i].id == id) return i;
        return std::nullopt;
    }

    // Problems admitted to scoring.
    bool admitted(std::size_t i) const { return reports.at(i).ok(); }
};

struct LoadOptions {
    // Admit records that fail validation; they are kept for adjudication-only
    // workflows and excluded from scoring.
    bool permissive = false;
};

namespace detail {

inline Problem problem_from_json(const nlohmann::json& j, std::size_t line) {
    if (!j.is_object()) throw SchemaError(line, "record is not an object");
    auto str = [&](const char* key, const std::string& id) -> std::string {
        if (!j.contains(key)) {
            throw SchemaError(line, (id.empty() ? std::string("record") : "problem \"" + id + "\"") +
                                        " is missing key \"" + key + "\"");
        }
        if (!j.at(key).is_string()) throw SchemaError(line, std::string("key \"") + key + "\" must be a string");
        return j.at(key).get<std::string>();
    };
    Problem p;
    p.id = str("id", "");
    if (p.id.empty()) throw SchemaError(line, "empty id");
    const auto source = source_from_string(str("source", p.id));
    if (!source) throw SchemaError(line, "problem \"" + p.id + "\" has unknown source");
    p.source = *source;
    const auto category = category_from_string(str("category", p.id));
    if (!category) throw SchemaError(line, "problem \"" + p.id + "\" has unknown category");
    p.category = *category;
    p.gold_answer = str("gold_answer", p.id);
    for (Representation r : kRepresentations) p.variants[r] = str(std::string(to_key(r)).c_str(), p.id);
    auto flag = [&](const char* key) {
        if (!j.contains(key)) return false;
        if (!j.at(key).is_boolean()) throw SchemaError(line, std::string("key \"") + key + "\" must be a boolean");
        return j.at(key).get<bool>();
    };
    p.opaque_gold = flag("opaque_gold");
    p.exact_decimal = flag("exact_decimal");
    return p;
}

}  // namespace detail

inline nlohmann::json to_json(const Problem& p) {
    nlohmann::json j = {{"id", p.id},
                        {"source", to_string(p.source)},
                        {"category", to_string(p.category)},
                        {"gold_answer", p.gold_answer}};
    for (Representation r : kRepresentations) j[std::string(to_key(r))] = p.variant(r);
    if (p.opaque_gold) j["opaque_gold"] = true;
    if (p.exact_decimal) j["exact_decimal"] = true;
    return j;
}

/// Parses dataset bytes. `name` becomes the manifest name.
inline ProblemSet parse_dataset(const std::string& bytes, std::string name, LoadOptions options = {}) {
    ProblemSet set;
    set.manifest = {std::move(name), std::string(kDatasetFormatVersion), sha256_hex(bytes)};
    std::unordered_set<std::string> seen;
    std::istringstream in(bytes);
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError(line, std::string("malformed JSON: ") + e.what());
        }
        Problem p = detail::problem_from_json(j, line);
        if (!seen.insert(p.id).second) throw DuplicateIdError(p.id);
        ValidationReport report = validate_problem(p);
        if (!report.ok() && !options.permissive) {
            throw ValidationError("line " + std::to_string(line) + ": problem \"" + p.id +
                                  "\": " + std::string(to_string(report.violations.front().kind)));
        }
        set.problems.push_back(std::move(p));
        set.reports.push_back(std::move(report));
    }
    if (set.problems.empty()) throw SchemaError(line, "dataset contains no problems");
    return set;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IOError("error reading " + path.string());
    return ss.str();
}

inline ProblemSet load_dataset(const std::filesystem::path& path, LoadOptions options = {}) {
    return parse_dataset(read_file(path), path.stem().string(), options);
}

}  // namespace georep
