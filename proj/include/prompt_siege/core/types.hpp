#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prompt_siege/core/error.hpp"
#include "prompt_siege/core/hashing.hpp"

namespace prompt_siege {

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

// ---------------------------------------------------------------------------
// Prompt
// ---------------------------------------------------------------------------

enum class PromptOrigin { initial, expanded, refined, updated, baseline };

inline std::string_view to_string(PromptOrigin o) {
    switch (o) {
        case PromptOrigin::initial: return "initial";
        case PromptOrigin::expanded: return "expanded";
        case PromptOrigin::refined: return "refined";
        case PromptOrigin::updated: return "updated";
        case PromptOrigin::baseline: return "baseline";
    }
    return "?";
}

inline PromptOrigin prompt_origin_from_string(std::string_view s) {
    for (auto o : {PromptOrigin::initial, PromptOrigin::expanded, PromptOrigin::refined,
                   PromptOrigin::updated, PromptOrigin::baseline}) {
        if (to_string(o) == s) return o;
    }
    throw ValidationError("unknown prompt origin '" + std::string(s) + "'");
}

/// A text candidate together with the phase and round that produced it.
/// The id is a content hash of (text, origin, round_index).
class Prompt {
public:
    Prompt(std::string text, PromptOrigin origin, std::uint32_t round_index)
        : text_(std::move(text)), origin_(origin), round_index_(round_index) {
        if (trim(text_).empty()) throw ValidationError("prompt text is empty");
        if ((round_index_ == 0) != (origin_ == PromptOrigin::initial)) {
            throw ValidationError("prompt round_index must be 0 exactly when origin is initial");
        }
        id_ = sha256_hex(text_ + '\x1f' + std::string(to_string(origin_)) + '\x1f' +
                         std::to_string(round_index_))
                  .substr(0, 16);
    }

    static Prompt initial(std::string text) {
        return Prompt(std::move(text), PromptOrigin::initial, 0);
    }

    const std::string& text() const noexcept { return text_; }
    PromptOrigin origin() const noexcept { return origin_; }
    std::uint32_t round_index() const noexcept { return round_index_; }
    const std::string& id() const noexcept { return id_; }

    bool operator==(const Prompt&) const = default;

private:
    std::string text_;
    PromptOrigin origin_;
    std::uint32_t round_index_;
    std::string id_;
};

// ---------------------------------------------------------------------------
// MotionClip
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0, y = 0, z = 0;
    bool operator==(const Vec3&) const = default;
};

/// T x J x 3 joint positions in meters, row-major (frame, joint, axis).
class MotionClip {
public:
    MotionClip(std::size_t frames, std::size_t joints, double fps, std::vector<double> data,
               std::optional<std::string> source_prompt_id = std::nullopt)
        : frames_(frames),
          joints_(joints),
          fps_(fps),
          data_(std::move(data)),
          source_prompt_id_(std::move(source_prompt_id)) {
        if (frames_ < 2) throw ValidationError("motion clip needs at least 2 frames");
        if (joints_ < 1) throw ValidationError("motion clip needs at least 1 joint");
        if (!(fps_ > 0) || !std::isfinite(fps_)) throw ValidationError("motion clip fps must be > 0");
        if (data_.size() != frames_ * joints_ * 3) {
            throw ValidationError("motion clip data size does not match T x J x 3");
        }
        if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
            throw ValidationError("motion clip contains non-finite coordinates");
        }
        Sha256 frames_hash;
        frames_hash.update_u64(frames_).update_u64(joints_);
        for (double v : data_) frames_hash.update_f64(v);
        frames_digest_ = to_hex(frames_hash.finish());
        id_ = to_hex(Sha256{}.update(frames_digest_).update_f64(fps_).finish()).substr(0, 16);
    }

    std::size_t frame_count() const noexcept { return frames_; }
    std::size_t joint_count() const noexcept { return joints_; }
    double fps() const noexcept { return fps_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::string& id() const noexcept { return id_; }
    const std::string& frames_digest() const noexcept { return frames_digest_; }
    const std::optional<std::string>& source_prompt_id() const noexcept { return source_prompt_id_; }

    Vec3 at(std::size_t t, std::size_t j) const {
        const std::size_t o = (t * joints_ + j) * 3;
        return {data_[o], data_[o + 1], data_[o + 2]};
    }
    Vec3 root(std::size_t t) const { return at(t, 0); }

    MotionClip with_source(std::optional<std::string> source_prompt_id) const {
        return MotionClip(frames_, joints_, fps_, data_, std::move(source_prompt_id));
    }

    // Equality is on content; provenance is metadata.
    bool operator==(const MotionClip& o) const {
        return frames_ == o.frames_ && joints_ == o.joints_ && fps_ == o.fps_ && data_ == o.data_;
    }

private:
    std::size_t frames_;
    std::size_t joints_;
    double fps_;
    std::vector<double> data_;
    std::optional<std::string> source_prompt_id_;
    std::string frames_digest_;
    std::string id_;
};

// ---------------------------------------------------------------------------
// FeatureVector
// ---------------------------------------------------------------------------

enum class FeatureSpace { motion, text, eval_motion, eval_text };

inline std::string_view to_string(FeatureSpace s) {
    switch (s) {
        case FeatureSpace::motion: return "motion";
        case FeatureSpace::text: return "text";
        case FeatureSpace::eval_motion: return "eval_motion";
        case FeatureSpace::eval_text: return "eval_text";
    }
    return "?";
}

inline FeatureSpace feature_space_from_string(std::string_view s) {
    for (auto v : {FeatureSpace::motion, FeatureSpace::text, FeatureSpace::eval_motion,
                   FeatureSpace::eval_text}) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("unknown feature space '" + std::string(s) + "'");
}

class FeatureVector {
public:
    FeatureVector(std::vector<double> values, FeatureSpace space)
        : values_(std::move(values)), space_(space) {
        if (values_.empty()) throw ValidationError("feature vector must have d > 0");
        if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
            throw ValidationError("feature vector contains non-finite entries");
        }
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }
    FeatureSpace space() const noexcept { return space_; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool operator==(const FeatureVector&) const = default;

private:
    std::vector<double> values_;
    FeatureSpace space_;
};

// ---------------------------------------------------------------------------
// AttackConfig
// ---------------------------------------------------------------------------

struct AttackConfig {
    std::uint32_t K = 50;
    std::uint32_t N = 20;
    double eta = 0.4;
    std::uint64_t run_seed = 0;
    std::uint32_t llm_retry_limit = 3;
    std::uint32_t score_decimals = 4;
    std::optional<std::uint64_t> max_victim_queries;
    // Upper bound on concurrent victim queries inside one scoring round.
    std::uint32_t parallelism = 4;
    // Seeds drawn per prompt; motion_sim is averaged across them.
    std::uint32_t victim_samples = 1;
    std::optional<std::string> initial_prompt;
    bool bootstrap_initial = false;

    bool operator==(const AttackConfig&) const = default;
};

inline AttackConfig validate_config(const AttackConfig& c) {
    if (!(c.eta >= 0.0 && c.eta <= 1.0)) throw ConfigError("eta must be in [0, 1]");
    if (c.K < 1) throw ConfigError("K must be ≥ 1");
    if (c.N < 1) throw ConfigError("N must be ≥ 1");
    if (c.score_decimals < 1) throw ConfigError("score_decimals must be ≥ 1");
    if (c.parallelism < 1) throw ConfigError("parallelism must be ≥ 1");
    if (c.victim_samples < 1) throw ConfigError("victim_samples must be ≥ 1");
    if (c.initial_prompt && trim(*c.initial_prompt).empty()) {
        throw ConfigError("initial_prompt must not be empty");
    }
    return c;
}

// ---------------------------------------------------------------------------
// ScoredPrompt / AgentState
// ---------------------------------------------------------------------------

inline constexpr double kSimilaritySlack = 1e-9;

struct ScoredPrompt {
    Prompt prompt;
    double motion_sim;
    double text_sim;
    std::string motion_ref;

    ScoredPrompt(Prompt p, double motion, double text, std::string ref)
        : prompt(std::move(p)), motion_sim(motion), text_sim(text), motion_ref(std::move(ref)) {
        for (double v : {motion_sim, text_sim}) {
            if (!std::isfinite(v) || v < -1.0 - kSimilaritySlack || v > 1.0 + kSimilaritySlack) {
                throw ValidationError("similarity must be finite and within [-1, 1]");
            }
        }
    }

    bool operator==(const ScoredPrompt&) const = default;
};

enum class StateParity { pre_expansion, post_expansion_or_update, post_refinement };

inline std::string_view to_string(StateParity p) {
    switch (p) {
        case StateParity::pre_expansion: return "pre_expansion";
        case StateParity::post_expansion_or_update: return "post_expansion_or_update";
        case StateParity::post_refinement: return "post_refinement";
    }
    return "?";
}

inline StateParity state_parity_from_string(std::string_view s) {
    for (auto v : {StateParity::pre_expansion, StateParity::post_expansion_or_update,
                   StateParity::post_refinement}) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("unknown state parity '" + std::string(s) + "'");
}

struct AgentState {
    std::uint64_t step_index;
    StateParity parity;
    std::vector<Prompt> prompts;
    std::optional<std::vector<ScoredPrompt>> scores;

    AgentState(std::uint64_t step, StateParity par, std::vector<Prompt> ps,
               std::optional<std::vector<ScoredPrompt>> sc = std::nullopt)
        : step_index(step), parity(par), prompts(std::move(ps)), scores(std::move(sc)) {
        if (prompts.empty()) throw ValidationError("agent state must hold at least one prompt");
        if (scores.has_value() != (parity == StateParity::post_refinement)) {
            throw ValidationError("agent state scores must be present exactly post_refinement");
        }
        if (parity == StateParity::pre_expansion && prompts.size() != 1) {
            throw ValidationError("pre_expansion state holds exactly one prompt");
        }
    }

    bool operator==(const AgentState&) const = default;
};

}  // namespace prompt_siege
