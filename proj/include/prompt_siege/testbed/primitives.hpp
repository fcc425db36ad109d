#pragma once

#include <array>
#include <fstream>
#include <numbers>
#include <unordered_map>

#include "prompt_siege/assets.hpp"
#include "prompt_siege/core/serialize.hpp"

namespace prompt_siege::testbed {

/// Lowercases ASCII and splits on every byte that is not an ASCII letter or
/// digit. Bytes >= 0x80 stay inside tokens so UTF-8 words survive intact.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(c >= 0x80 ? c : std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

/// Root path L(t) = velocity * t + amplitude * s(t) per axis, with
/// s(t) = |sin(pi t / period + phase)| when rectified, else sin(2 pi t / period + phase).
struct MotionPrimitive {
    std::string keyword;
    std::vector<std::string> synonyms;
    std::size_t frames = 0;
    std::array<double, 3> velocity{};
    std::array<double, 3> amplitude{};
    double period = 1;
    std::array<double, 3> phase{};
    std::array<bool, 3> rectified{};

    Vec3 trajectory(double t) const {
        std::array<double, 3> out{};
        for (int a = 0; a < 3; ++a) {
            const double s = rectified[a] ? std::abs(std::sin(std::numbers::pi * t / period + phase[a]))
                                          : std::sin(2 * std::numbers::pi * t / period + phase[a]);
            out[a] = velocity[a] * t + amplitude[a] * s;
        }
        return {out[0], out[1], out[2]};
    }

    // Keyword first, then the synonyms.
    std::vector<std::string> words() const {
        std::vector<std::string> w{keyword};
        w.insert(w.end(), synonyms.begin(), synonyms.end());
        return w;
    }
};

struct Lexicon {
    std::vector<std::string> subjects;
    std::vector<std::string> fillers;
    std::vector<std::string> function_words;
};

class PrimitiveTable {
public:
    static constexpr std::string_view kFormat = "prompt-siege-primitives/1";

    static PrimitiveTable from_json(const json& doc) {
        if (doc.value("format", "") != kFormat) {
            throw ConfigError("primitive table: expected format " + std::string(kFormat));
        }
        PrimitiveTable t;
        try {
            t.fps_ = doc.at("fps").get<double>();
            const auto rs = doc.at("root_start").get<std::array<double, 3>>();
            t.root_start_ = {rs[0], rs[1], rs[2]};
            for (const auto& o : doc.at("joint_offsets")) {
                const auto v = o.get<std::array<double, 3>>();
                t.joint_offsets_.push_back({v[0], v[1], v[2]});
            }
            t.idle_frames_ = doc.at("idle_frames").get<std::size_t>();
            t.noise_amplitude_ = doc.at("noise").at("amplitude").get<double>();
            t.noise_tail_ = doc.at("noise").at("tail_frames").get<std::size_t>();
            for (const auto& p : doc.at("primitives")) {
                MotionPrimitive m;
                m.keyword = p.at("keyword").get<std::string>();
                m.synonyms = p.at("synonyms").get<std::vector<std::string>>();
                m.frames = p.at("frames").get<std::size_t>();
                m.velocity = p.at("velocity").get<std::array<double, 3>>();
                m.amplitude = p.at("amplitude").get<std::array<double, 3>>();
                m.period = p.at("period").get<double>();
                m.phase = p.at("phase").get<std::array<double, 3>>();
                m.rectified = p.at("rectified").get<std::array<bool, 3>>();
                if (m.frames < 1 || !(m.period > 0)) throw ConfigError("primitive " + m.keyword + ": bad frames/period");
                if (m.synonyms.size() < 3) throw ConfigError("primitive " + m.keyword + ": needs ≥ 3 synonyms");
                t.primitives_.push_back(std::move(m));
            }
            const auto& lex = doc.at("lexicon");
            t.lexicon_.subjects = lex.at("subjects").get<std::vector<std::string>>();
            t.lexicon_.fillers = lex.at("fillers").get<std::vector<std::string>>();
            t.lexicon_.function_words = lex.at("function_words").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("primitive table: ") + e.what());
        }
        if (t.idle_frames_ < 2) throw ConfigError("primitive table: idle_frames must be ≥ 2");
        for (std::size_t i = 0; i < t.primitives_.size(); ++i) {
            for (const auto& w : t.primitives_[i].words()) {
                if (!t.word_to_primitive_.emplace(w, i).second) {
                    throw ConfigError("primitive table: word '" + w + "' is listed twice");
                }
            }
        }
        return t;
    }

    static const PrimitiveTable& builtin() {
        static const PrimitiveTable table = from_json(json::parse(assets::kPrimitiveTable));
        return table;
    }

    static PrimitiveTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open primitive table " + path);
        return from_json(json::parse(in));
    }

    double fps() const noexcept { return fps_; }
    Vec3 root_start() const noexcept { return root_start_; }
    const std::vector<Vec3>& joint_offsets() const noexcept { return joint_offsets_; }
    std::size_t joint_count() const noexcept { return joint_offsets_.size() + 1; }
    std::size_t idle_frames() const noexcept { return idle_frames_; }
    double noise_amplitude() const noexcept { return noise_amplitude_; }
    std::size_t noise_tail() const noexcept { return noise_tail_; }
    const std::vector<MotionPrimitive>& primitives() const noexcept { return primitives_; }
    const Lexicon& lexicon() const noexcept { return lexicon_; }

    std::optional<std::size_t> primitive_of(std::string_view word) const {
        auto it = word_to_primitive_.find(std::string(word));
        if (it == word_to_primitive_.end()) return std::nullopt;
        return it->second;
    }

    // Every word the heuristic agent considers fluent.
    std::vector<std::string> dictionary() const {
        std::vector<std::string> out;
        for (const auto& p : primitives_) {
            for (const auto& w : p.words()) out.push_back(w);
        }
        for (const auto* list : {&lexicon_.subjects, &lexicon_.fillers, &lexicon_.function_words}) {
            out.insert(out.end(), list->begin(), list->end());
        }
        return out;
    }

    bool in_dictionary(std::string_view word) const {
        if (primitive_of(word)) return true;
        for (const auto* list : {&lexicon_.subjects, &lexicon_.fillers, &lexicon_.function_words}) {
            if (std::find(list->begin(), list->end(), word) != list->end()) return true;
        }
        return false;
    }

private:
    double fps_ = 20;
    Vec3 root_start_{};
    std::vector<Vec3> joint_offsets_;
    std::size_t idle_frames_ = 30;
    double noise_amplitude_ = 0.01;
    std::size_t noise_tail_ = 10;
    std::vector<MotionPrimitive> primitives_;
    Lexicon lexicon_;
    std::unordered_map<std::string, std::size_t> word_to_primitive_;
};

}  // namespace prompt_siege::testbed
