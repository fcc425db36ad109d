#pragma once

#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "prompt_siege/assets.hpp"
#include "prompt_siege/core/record.hpp"

namespace prompt_siege {

/// Instruction text with `{placeholder}` slots; `{{` and `}}` are literal braces.
///
/// The version comes from a leading `[prompt-siege:<kind> <version>]` tag
/// line when present, otherwise from a content hash.
class InstructionTemplate {
public:
    InstructionTemplate(InstructionKind kind, std::string text) : kind_(kind), text_(std::move(text)) {
        const auto found = placeholders(text_);
        static const std::set<std::string> known = {"N", "initial_prompt", "prompt_list", "contrast_block"};
        for (const auto& p : found) {
            if (!known.contains(p)) throw ConfigError("template uses unknown placeholder {" + p + "}");
        }
        for (const auto& p : required(kind_)) {
            if (!found.contains(p)) {
                throw ConfigError(std::string(to_string(kind_)) + " template is missing placeholder {" + p + "}");
            }
        }
        static const std::regex tag(R"(^\[prompt-siege:([a-z]+) ([^\]\s]+)\])");
        std::smatch m;
        const std::string first_line = text_.substr(0, text_.find('\n'));
        if (std::regex_search(first_line, m, tag)) {
            if (m[1].str() != to_string(kind_)) {
                throw ConfigError("template tagged '" + m[1].str() + "' used as " + std::string(to_string(kind_)));
            }
            version_ = m[2].str();
        } else {
            version_ = "sha256:" + sha256_hex(text_).substr(0, 12);
        }
    }

    static InstructionTemplate load(InstructionKind kind, const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open template " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return InstructionTemplate(kind, ss.str());
    }

    InstructionKind kind() const noexcept { return kind_; }
    const std::string& text() const noexcept { return text_; }
    const std::string& version() const noexcept { return version_; }

    std::string render(const std::map<std::string, std::string>& values) const {
        std::string out;
        out.reserve(text_.size());
        for (std::size_t i = 0; i < text_.size(); ++i) {
            const char c = text_[i];
            if (c == '{' && i + 1 < text_.size() && text_[i + 1] == '{') {
                out.push_back('{');
                ++i;
            } else if (c == '}' && i + 1 < text_.size() && text_[i + 1] == '}') {
                out.push_back('}');
                ++i;
            } else if (c == '{') {
                const auto close = text_.find('}', i);
                const std::string name = text_.substr(i + 1, close - i - 1);
                auto it = values.find(name);
                if (it == values.end()) throw ConfigError("no value for placeholder {" + name + "}");
                out += it->second;
                i = close;
            } else {
                out.push_back(c);
            }
        }
        return out;
    }

    static std::set<std::string> required(InstructionKind kind) {
        switch (kind) {
            case InstructionKind::expand: return {"N", "initial_prompt"};
            case InstructionKind::refine: return {"N", "prompt_list"};
            case InstructionKind::update: return {"N", "contrast_block"};
            case InstructionKind::bootstrap: return {};
        }
        return {};
    }

private:
    static std::set<std::string> placeholders(const std::string& text) {
        std::set<std::string> out;
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (text[i] == '{') {
                if (i + 1 < text.size() && text[i + 1] == '{') {
                    ++i;
                    continue;
                }
                const auto close = text.find('}', i);
                if (close == std::string::npos) throw ConfigError("template has an unterminated placeholder");
                out.insert(text.substr(i + 1, close - i - 1));
                i = close;
            } else if (text[i] == '}' && i + 1 < text.size() && text[i + 1] == '}') {
                ++i;
            }
        }
        return out;
    }

    InstructionKind kind_;
    std::string text_;
    std::string version_;
};

struct TemplateSet {
    InstructionTemplate expand;
    InstructionTemplate refine;
    InstructionTemplate update;
    InstructionTemplate bootstrap;

    static TemplateSet defaults() {
        return {InstructionTemplate(InstructionKind::expand, std::string(assets::kExpandTemplate)),
                InstructionTemplate(InstructionKind::refine, std::string(assets::kRefineTemplate)),
                InstructionTemplate(InstructionKind::update, std::string(assets::kUpdateTemplate)),
                InstructionTemplate(InstructionKind::bootstrap, std::string(assets::kBootstrapTemplate))};
    }

    std::map<std::string, std::string> versions() const {
        return {{"expand", expand.version()},
                {"refine", refine.version()},
                {"update", update.version()},
                {"bootstrap", bootstrap.version()}};
    }
};

}  // namespace prompt_siege
