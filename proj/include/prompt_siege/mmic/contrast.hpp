#pragma once

#include <cstdio>
#include <regex>

#include "prompt_siege/core/types.hpp"

namespace prompt_siege {

/// Fixed-point rendering; exact binary ties round half-to-even. A negative
/// value that rounds to zero renders as positive zero.
inline std::string format_fixed(double value, unsigned decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", static_cast<int>(decimals), value);
    std::string s(buf);
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

inline std::string escape_prompt_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

inline std::string unescape_prompt_text(std::string_view text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
            const char n = text[++i];
            out.push_back(n == 'n' ? '\n' : n);
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

struct ContrastLine {
    std::size_t index;
    std::string text;
    std::string value;

    bool operator==(const ContrastLine&) const = default;
};

/// Prompts with their motion similarity, as shown to the update phase.
struct ContrastBlock {
    std::vector<ContrastLine> lines;
    std::string rendered;
};

inline std::string render_contrast_lines(const std::vector<ContrastLine>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out.push_back('\n');
        out += std::to_string(lines[i].index) + ". \"" + escape_prompt_text(lines[i].text) +
               "\" | motion_similarity=" + lines[i].value;
    }
    return out;
}

inline ContrastBlock render_contrast_block(const std::vector<ScoredPrompt>& scored, unsigned decimals) {
    if (scored.empty()) throw ValidationError("contrast block needs at least one scored prompt");
    ContrastBlock block;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        block.lines.push_back({i + 1, scored[i].prompt.text(), format_fixed(scored[i].motion_sim, decimals)});
    }
    block.rendered = render_contrast_lines(block.lines);
    return block;
}

struct ParsedContrastLine {
    std::size_t index;
    std::string text;
    double score;
};

/// Inverse of render_contrast_block; lines that do not match are skipped.
inline std::vector<ParsedContrastLine> parse_contrast_block(std::string_view rendered) {
    static const std::regex line_re(R"re(^\s*(\d+)\. "((?:[^"\\]|\\.)*)" \| motion_similarity=(-?\d+(?:\.\d+)?)\s*$)re");
    std::vector<ParsedContrastLine> out;
    std::size_t start = 0;
    while (start <= rendered.size()) {
        auto end = rendered.find('\n', start);
        if (end == std::string_view::npos) end = rendered.size();
        const std::string line(rendered.substr(start, end - start));
        std::smatch m;
        if (std::regex_match(line, m, line_re)) {
            out.push_back({std::stoul(m[1].str()), unescape_prompt_text(m[2].str()), std::stod(m[3].str())});
        }
        start = end + 1;
    }
    return out;
}

}  // namespace prompt_siege
