#pragma once

#include <regex>

#include "prompt_siege/core/record.hpp"
#include "prompt_siege/mmic/contrast.hpp"

namespace prompt_siege {

struct ParsedLLMResponse {
    std::vector<std::string> prompts;
    ParseStatus parse_status = ParseStatus::unparseable;
    std::string raw;
};

namespace detail {

inline std::string strip_quotes(std::string s) {
    auto strip_pair = [&s](std::string_view open, std::string_view close) {
        if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
            s = s.substr(open.size(), s.size() - open.size() - close.size());
            return true;
        }
        return false;
    };
    if (strip_pair("\"", "\"")) return unescape_prompt_text(s);
    if (strip_pair("'", "'") || strip_pair("“", "”") || strip_pair("`", "`")) return s;
    return s;
}

}  // namespace detail

/// Extracts `<index>. <text>` lines whose indices run 1, 2, 3, ... in order.
/// Whitespace and one pair of surrounding quotes are tolerated.
inline ParsedLLMResponse parse_llm_response(std::string_view raw, std::size_t N) {
    static const std::regex line_re(R"(^\s*(\d+)\s*[.)]\s+(.*\S)\s*$)");
    ParsedLLMResponse out;
    out.raw = std::string(raw);
    std::size_t expected = 1;
    std::size_t start = 0;
    while (start <= raw.size()) {
        auto end = raw.find('\n', start);
        if (end == std::string_view::npos) end = raw.size();
        const std::string line(raw.substr(start, end - start));
        start = end + 1;
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) continue;
        if (m[1].str().size() > 6 || std::stoul(m[1].str()) != expected) continue;
        std::string text(trim(detail::strip_quotes(std::string(trim(m[2].str())))));
        if (text.empty()) continue;
        out.prompts.push_back(std::move(text));
        ++expected;
    }
    if (out.prompts.empty()) {
        out.parse_status = ParseStatus::unparseable;
    } else if (out.prompts.size() == N) {
        out.parse_status = ParseStatus::ok;
    } else {
        out.parse_status = ParseStatus::count_mismatch;
        if (out.prompts.size() > N) out.prompts.resize(N);
    }
    return out;
}

inline std::string render_prompt_list(const std::vector<Prompt>& prompts) {
    std::string out;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (i) out.push_back('\n');
        out += std::to_string(i + 1) + ". " + prompts[i].text();
    }
    return out;
}

}  // namespace prompt_siege
