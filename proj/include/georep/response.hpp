#pragma once

// Strict extraction of the structured model output.

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace georep {

enum class ResponseStatus : std::uint8_t { Valid, MalformedJSON, MissingKeys, ExtraKeys };

inline std::string_view to_string(ResponseStatus s) {
    switch (s) {
        case ResponseStatus::Valid: return "Valid";
        case ResponseStatus::MalformedJSON: return "MalformedJSON";
        case ResponseStatus::MissingKeys: return "MissingKeys";
        case ResponseStatus::ExtraKeys: return "ExtraKeys";
    }
    return "?";
}

inline std::optional<ResponseStatus> response_status_from_string(std::string_view s) {
    for (auto v : {ResponseStatus::Valid, ResponseStatus::MalformedJSON, ResponseStatus::MissingKeys,
                   ResponseStatus::ExtraKeys})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

struct ParsedResponse {
    std::string raw_text;
    ResponseStatus status = ResponseStatus::MalformedJSON;
    std::string reasoning;       // set when Valid
    std::string numeric_answer;  // set when Valid
    std::string note;            // transport or conversion failure detail

    bool valid() const { return status == ResponseStatus::Valid; }
    friend bool operator==(const ParsedResponse&, const ParsedResponse&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

// Removes at most one surrounding ``` fence pair (with optional info string).
inline std::string_view strip_code_fence(std::string_view s) {
    s = trim(s);
    if (s.size() < 6 || s.substr(0, 3) != "```" || s.substr(s.size() - 3) != "```") return s;
    const auto newline = s.find('\n');
    if (newline == std::string_view::npos || newline >= s.size() - 3) return s;
    return trim(s.substr(newline + 1, s.size() - 3 - (newline + 1)));
}

struct ObjectParse {
    ResponseStatus status = ResponseStatus::MalformedJSON;
    nlohmann::json object;
};

// Strict single-object parse; classifies the key set against `keys`.
inline ObjectParse parse_exact_object(std::string_view raw, std::initializer_list<const char*> keys) {
    ObjectParse out;
    const std::string_view body = strip_code_fence(raw);
    try {
        out.object = nlohmann::json::parse(body.begin(), body.end());
    } catch (const nlohmann::json::exception&) {
        return out;
    }
    if (!out.object.is_object()) return out;
    for (const char* key : keys) {
        if (!out.object.contains(key)) {
            out.status = ResponseStatus::MissingKeys;
            return out;
        }
    }
    if (out.object.size() > keys.size()) {
        out.status = ResponseStatus::ExtraKeys;
        return out;
    }
    for (const char* key : keys) {
        if (!out.object.at(key).is_string()) return out;  // wrong type counts as malformed
    }
    out.status = ResponseStatus::Valid;
    return out;
}

}  // namespace detail

/// Classifies a raw model body. Never throws.
inline ParsedResponse extract_answer(std::string_view raw) {
    ParsedResponse r;
    r.raw_text = std::string(raw);
    auto parsed = detail::parse_exact_object(raw, {"reasoning", "numeric_answer"});
    r.status = parsed.status;
    if (r.status == ResponseStatus::Valid) {
        r.reasoning = parsed.object.at("reasoning").get<std::string>();
        r.numeric_answer = parsed.object.at("numeric_answer").get<std::string>();
    }
    return r;
}

struct ConversionResponse {
    ResponseStatus status = ResponseStatus::MalformedJSON;
    std::string euclidean_problem;
};

inline ConversionResponse extract_conversion(std::string_view raw) {
    ConversionResponse r;
    auto parsed = detail::parse_exact_object(raw, {"euclidean_problem"});
    r.status = parsed.status;
    if (r.status == ResponseStatus::Valid) r.euclidean_problem = parsed.object.at("euclidean_problem").get<std::string>();
    return r;
}

}  // namespace georep
