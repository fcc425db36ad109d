#pragma once

#include <random>
#include <regex>
#include <set>

#include "prompt_siege/mmic/contrast.hpp"
#include "prompt_siege/testbed/synth.hpp"

namespace prompt_siege::testbed {

namespace detail {

inline std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        out.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

inline std::vector<std::string> numbered_lines(std::string_view text) {
    static const std::regex re(R"(^\s*\d+\.\s+(.*\S)\s*$)");
    std::vector<std::string> out;
    for (const auto& line : lines_of(text)) {
        std::smatch m;
        if (std::regex_match(line, m, re)) out.push_back(m[1].str());
    }
    return out;
}

inline std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

inline std::string numbered(const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) out += std::to_string(i + 1) + ". " + lines[i] + "\n";
    return out;
}

inline std::vector<std::string> cycle_to(std::vector<std::string> lines, std::size_t n) {
    if (lines.empty()) return lines;
    const std::size_t have = lines.size();
    for (std::size_t i = 0; lines.size() < n; ++i) lines.push_back(lines[i % have]);
    lines.resize(n);
    return lines;
}

}  // namespace detail

/// Rule-based stand-in for the hosted LLM, driven only by the rendered
/// instruction text so it can sit behind the ordinary LLM gateway.
class HeuristicLlm {
public:
    explicit HeuristicLlm(std::uint64_t seed = 0, const PrimitiveTable& table = PrimitiveTable::builtin())
        : seed_(seed), table_(&table) {}

    std::string respond(InstructionKind kind, std::string_view instruction) const {
        std::mt19937_64 rng(seed_ ^ low64(sha256(instruction)));
        const std::size_t n = requested_count(instruction);
        switch (kind) {
            case InstructionKind::expand: return expand(instruction, n, rng);
            case InstructionKind::refine: return refine(instruction, n);
            case InstructionKind::update: return update(instruction, n, rng);
            case InstructionKind::bootstrap: return "1. a person " + table_->primitives().front().synonyms.front() + "\n";
        }
        return {};
    }

    // Kind from the template tag line, falling back to content sniffing.
    static InstructionKind detect_kind(std::string_view instruction) {
        static const std::regex tag(R"(\[prompt-siege:([a-z]+) )");
        std::match_results<std::string_view::const_iterator> m;
        if (std::regex_search(instruction.begin(), instruction.end(), m, tag)) {
            return instruction_kind_from_string(m[1].str());
        }
        if (instruction.find("motion_similarity=") != std::string_view::npos) return InstructionKind::update;
        if (instruction.find("Descriptions:") != std::string_view::npos) return InstructionKind::refine;
        if (instruction.find("Description:") != std::string_view::npos) return InstructionKind::expand;
        return InstructionKind::bootstrap;
    }

    static std::size_t requested_count(std::string_view instruction) {
        static const std::regex re(R"(exactly (\d+))");
        std::match_results<std::string_view::const_iterator> m;
        if (std::regex_search(instruction.begin(), instruction.end(), m, re)) {
            return std::max<std::size_t>(1, std::stoul(m[1].str()));
        }
        return 1;
    }

private:
    template <class V>
    static const std::string& pick(const V& v, std::mt19937_64& rng) {
        return v[rng() % v.size()];
    }

    std::optional<std::size_t> first_primitive(std::string_view text) const {
        for (const auto& t : tokenize(text)) {
            if (auto p = table_->primitive_of(t)) return p;
        }
        return std::nullopt;
    }

    // Line i keeps the initial movement under its i-th surface form; from the
    // second line on, another primitive is chained after it.
    std::string expand(std::string_view instruction, std::size_t n, std::mt19937_64& rng) const {
        const auto lines = detail::lines_of(instruction);
        std::string initial;
        for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
            if (trim(lines[i]) == "Description:") {
                initial = std::string(trim(lines[i + 1]));
                break;
            }
        }
        const auto& prims = table_->primitives();
        const auto& fillers = table_->lexicon().fillers;
        const auto& base = prims[first_primitive(initial).value_or(0)];
        const auto base_words = base.words();

        std::vector<std::string> out;
        std::set<std::string> seen;
        for (std::size_t i = 0; i < n; ++i) {
            std::string line = "a person " + base_words[i % base_words.size()] + " " + pick(fillers, rng);
            if (i >= 1) {
                const auto words = prims[(i - 1) % prims.size()].words();
                line += " and then " + pick(words, rng) + " " + pick(fillers, rng);
            }
            while (!seen.insert(line).second) line += " " + pick(fillers, rng);
            out.push_back(std::move(line));
        }
        return detail::numbered(out);
    }

    std::string refine_one(const std::string& text) const {
        std::vector<std::string> kept;
        for (auto& t : tokenize(text)) {
            if (table_->in_dictionary(t)) kept.push_back(std::move(t));
        }
        const auto& subjects = table_->lexicon().subjects;
        std::size_t lead = 0;
        while (lead < kept.size() && std::find(subjects.begin(), subjects.end(), kept[lead]) != subjects.end()) ++lead;
        kept.erase(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(lead));
        if (kept.empty()) return text;
        return "a person " + detail::join(kept);
    }

    std::string refine(std::string_view instruction, std::size_t n) const {
        std::vector<std::string> out;
        for (const auto& line : detail::numbered_lines(instruction)) out.push_back(refine_one(line));
        return detail::numbered(detail::cycle_to(std::move(out), n));
    }

    // The top half by score is kept verbatim. Every motion word in the bottom
    // half becomes a surface form of the primitive with the best mean score.
    std::string update(std::string_view instruction, std::size_t n, std::mt19937_64& rng) const {
        auto entries = parse_contrast_block(instruction);
        if (entries.empty()) {
            auto echo = detail::numbered_lines(instruction);
            return detail::numbered(echo) + "# unparseable contrast block; prompts returned unchanged\n";
        }
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.score > b.score; });

        const auto& prims = table_->primitives();
        std::vector<double> total(prims.size(), 0.0);
        std::vector<std::size_t> hits(prims.size(), 0);
        for (const auto& e : entries) {
            std::set<std::size_t> present;
            for (const auto& t : tokenize(e.text)) {
                if (auto p = table_->primitive_of(t)) present.insert(*p);
            }
            for (auto p : present) {
                total[p] += e.score;
                ++hits[p];
            }
        }
        std::optional<std::size_t> best;
        double best_credit = 0;
        for (std::size_t p = 0; p < prims.size(); ++p) {
            if (!hits[p]) continue;
            const double credit = total[p] / static_cast<double>(hits[p]);
            if (!best || credit > best_credit) {
                best = p;
                best_credit = credit;
            }
        }

        const std::size_t keep = (entries.size() + 1) / 2;
        std::vector<std::string> out;
        for (std::size_t i = 0; i < keep; ++i) out.push_back(entries[i].text);
        const auto words = prims[best.value_or(0)].words();
        const std::size_t offset = rng() % words.size();
        for (std::size_t i = keep; i < entries.size(); ++i) {
            std::vector<std::string> tokens = tokenize(entries[i].text);
            bool replaced = false;
            std::size_t j = 0;
            for (auto& t : tokens) {
                if (table_->primitive_of(t)) {
                    t = words[(offset + i + j++) % words.size()];
                    replaced = true;
                }
            }
            if (!replaced) {
                tokens.push_back("and");
                tokens.push_back(words[(offset + i) % words.size()]);
            }
            out.push_back(detail::join(tokens));
        }
        return detail::numbered(detail::cycle_to(std::move(out), n));
    }

    std::uint64_t seed_;
    const PrimitiveTable* table_;
};

inline std::string heuristic_llm(InstructionKind kind, std::string_view instruction, std::uint64_t seed) {
    return HeuristicLlm(seed).respond(kind, instruction);
}

class HeuristicLlmBackend : public LlmBackend {
public:
    explicit HeuristicLlmBackend(std::uint64_t seed = 0) : llm_(seed) {}
    GatewayDescriptor descriptor() const override {
        return {GatewayKind::llm, "heuristic", std::nullopt, 1, true};
    }
    std::string complete(std::string_view instruction) override {
        return llm_.respond(HeuristicLlm::detect_kind(instruction), instruction);
    }

private:
    HeuristicLlm llm_;
};

}  // namespace prompt_siege::testbed
