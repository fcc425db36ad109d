#pragma once

#include <complex>

#include "prompt_siege/gateway/gateway.hpp"
#include "prompt_siege/testbed/primitives.hpp"

namespace prompt_siege::testbed {

inline constexpr std::size_t kMotionFeatureDim = 8;
inline constexpr std::size_t kTextFeatureDim = 16;
// Chosen so that every keyword lands in a different bucket from each of its
// synonyms; TextFeatures.NoKeywordSharesABucketWithASynonym rescans the shipped table.
inline constexpr std::uint64_t kTextHashSeed = 203;

namespace detail {

// Deterministic offset in [-1, 1]^3 for an unknown token.
inline std::array<double, 3> token_noise(std::string_view token, std::uint64_t seed) {
    const auto d = Sha256{}.update_u64(seed).update(token).finish();
    std::array<double, 3> u{};
    for (int a = 0; a < 3; ++a) {
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v = (v << 8) | d[a * 4 + b];
        u[a] = 2.0 * v / 4294967295.0 - 1.0;
    }
    return u;
}

inline void push_pose(std::vector<double>& data, Vec3 root, const std::vector<Vec3>& offsets) {
    data.insert(data.end(), {root.x, root.y, root.z});
    for (const auto& o : offsets) data.insert(data.end(), {root.x + o.x, root.y + o.y, root.z + o.z});
}

}  // namespace detail

/// Toy victim model. Tokens that name a primitive contribute its trajectory in
/// order; each segment starts where the previous one ended. Tokens outside the
/// dictionary shift the last frames by a small seeded offset. Without any
/// primitive the result is an idle clip.
inline MotionClip synth_generate(std::string_view text, std::uint64_t seed,
                                 const PrimitiveTable& table = PrimitiveTable::builtin()) {
    const auto tokens = tokenize(text);
    std::vector<const MotionPrimitive*> segments;
    std::vector<std::string_view> unknown;
    for (const auto& tok : tokens) {
        if (auto p = table.primitive_of(tok)) {
            segments.push_back(&table.primitives()[*p]);
        } else if (!table.in_dictionary(tok)) {
            unknown.push_back(tok);
        }
    }

    const auto& offsets = table.joint_offsets();
    const std::size_t J = table.joint_count();
    std::vector<Vec3> roots;
    if (segments.empty()) {
        roots.assign(table.idle_frames(), table.root_start());
    } else {
        Vec3 last = table.root_start();
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto& p = *segments[s];
            const Vec3 origin = p.trajectory(0);
            const std::size_t first = s == 0 ? 0 : 1;
            const std::size_t stop = s == 0 ? p.frames : p.frames + 1;
            const Vec3 base = last;
            for (std::size_t f = first; f < stop; ++f) {
                const Vec3 l = p.trajectory(static_cast<double>(f));
                roots.push_back({base.x + l.x - origin.x, base.y + l.y - origin.y, base.z + l.z - origin.z});
            }
            last = roots.back();
        }
        if (roots.size() < 2) roots.push_back(roots.back());
        if (!unknown.empty()) {
            std::array<double, 3> n{};
            for (auto tok : unknown) {
                const auto u = detail::token_noise(tok, seed);
                for (int a = 0; a < 3; ++a) n[a] += u[a];
            }
            for (auto& v : n) v *= table.noise_amplitude() / static_cast<double>(unknown.size());
            const std::size_t T = roots.size();
            const std::size_t W = std::min(table.noise_tail(), T - 1);
            if (W > 0) {
                for (std::size_t f = T - 1 - W; f < T; ++f) {
                    const double r = static_cast<double>(f - (T - 1 - W)) / static_cast<double>(W);
                    roots[f].x += r * n[0];
                    roots[f].y += r * n[1];
                    roots[f].z += r * n[2];
                }
            }
        }
    }

    std::vector<double> data;
    data.reserve(roots.size() * J * 3);
    for (const auto& r : roots) detail::push_pose(data, r, offsets);
    return MotionClip(roots.size(), J, table.fps(), std::move(data));
}

inline MotionClip synth_generate(const Prompt& prompt, std::uint64_t seed) {
    return synth_generate(prompt.text(), seed);
}

/// Eight root-trajectory features. Speeds are in m/s; heights and the x
/// spectrum are taken relative to the first frame.
///   0 mean speed            1 population std of speed
///   2 net displacement x    3 net displacement z
///   4 max height gain       5 mean height gain
///   6 max_k |DFT_k(x - x0)| / T for k = 1..T/2
///   7 moving fraction (speed > 0.1 * peak) times peak speed
inline std::vector<double> motion_features(const MotionClip& clip) {
    const std::size_t T = clip.frame_count();
    std::vector<Vec3> r(T);
    for (std::size_t t = 0; t < T; ++t) r[t] = clip.root(t);

    std::vector<double> speed(T - 1);
    for (std::size_t t = 0; t + 1 < T; ++t) {
        const double dx = r[t + 1].x - r[t].x, dy = r[t + 1].y - r[t].y, dz = r[t + 1].z - r[t].z;
        speed[t] = std::sqrt(dx * dx + dy * dy + dz * dz) * clip.fps();
    }
    // Shifted by the first speed so constant-speed paths give exactly zero spread.
    const double s0 = speed[0];
    double shift = 0;
    for (double s : speed) shift += s - s0;
    shift /= static_cast<double>(speed.size());
    double var = 0;
    for (double s : speed) var += (s - s0 - shift) * (s - s0 - shift);
    var /= static_cast<double>(speed.size());
    const double mean = s0 + shift;
    const double vmax = *std::max_element(speed.begin(), speed.end());

    double hmax = 0, hmean = 0;
    for (const auto& p : r) {
        const double h = p.y - r[0].y;
        hmax = std::max(hmax, h);
        hmean += h;
    }
    hmean /= static_cast<double>(T);

    double spectrum = 0;
    for (std::size_t k = 1; k <= T / 2; ++k) {
        std::complex<double> acc = 0;
        for (std::size_t t = 0; t < T; ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t % T) / static_cast<double>(T);
            acc += (r[t].x - r[0].x) * std::polar(1.0, ang);
        }
        spectrum = std::max(spectrum, std::abs(acc) / static_cast<double>(T));
    }

    std::size_t moving = 0;
    for (double s : speed) moving += s > 0.1 * vmax ? 1 : 0;
    const double moving_term = static_cast<double>(moving) / static_cast<double>(speed.size()) * vmax;

    return {mean, std::sqrt(var), r[T - 1].x - r[0].x, r[T - 1].z - r[0].z, hmax, hmean, spectrum, moving_term};
}

inline FeatureVector synth_encode_motion(const MotionClip& clip, FeatureSpace space = FeatureSpace::motion) {
    return FeatureVector(motion_features(clip), space);
}

inline std::size_t text_bucket(std::string_view token, std::uint64_t hash_seed = kTextHashSeed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ULL;
    };
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(hash_seed >> (8 * i)));
    for (unsigned char c : token) mix(c);
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return static_cast<std::size_t>(h % kTextFeatureDim);
}

/// Hashed bag of words, L2-normalized.
inline std::vector<double> text_features(std::string_view text, std::uint64_t hash_seed = kTextHashSeed) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw ValidationError("empty prompt");
    std::vector<double> v(kTextFeatureDim, 0.0);
    for (const auto& t : tokens) v[text_bucket(t, hash_seed)] += 1.0;
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

inline FeatureVector synth_encode_text(const Prompt& prompt) {
    return FeatureVector(text_features(prompt.text()), FeatureSpace::text);
}

/// Keyword/synonym pairs sharing a bucket under the given seed.
inline std::vector<std::pair<std::string, std::string>> synonym_collisions(
    std::uint64_t hash_seed = kTextHashSeed, const PrimitiveTable& table = PrimitiveTable::builtin()) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : table.primitives()) {
        for (const auto& s : p.synonyms) {
            if (text_bucket(p.keyword, hash_seed) == text_bucket(s, hash_seed)) out.emplace_back(p.keyword, s);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gateway backends
// ---------------------------------------------------------------------------

class SynthVictim : public VictimBackend {
public:
    GatewayDescriptor descriptor() const override {
        return {GatewayKind::victim, "synth-victim", std::nullopt, 8, true};
    }
    MotionClip generate(std::string_view prompt, std::uint64_t seed) override { return synth_generate(prompt, seed); }
};

class SynthMotionEncoder : public MotionEncoderBackend {
public:
    explicit SynthMotionEncoder(GatewayKind kind = GatewayKind::motion_encoder) : kind_(kind) {}
    GatewayDescriptor descriptor() const override {
        return {kind_, kind_ == GatewayKind::motion_encoder ? "synth-motion" : "synth-eval-motion",
                kMotionFeatureDim, 8, true};
    }
    std::vector<double> encode(const MotionClip& clip) override { return motion_features(clip); }

private:
    GatewayKind kind_;
};

class SynthTextEncoder : public TextEncoderBackend {
public:
    GatewayDescriptor descriptor() const override {
        return {GatewayKind::text_encoder, "synth-text", kTextFeatureDim, 8, true};
    }
    std::vector<double> encode(std::string_view text) override { return text_features(text); }
};

/// Evaluation text encoder sharing the motion feature space: a text is
/// embedded as the features of the clip the toy generator makes for it.
class SynthEvalTextEncoder : public TextEncoderBackend {
public:
    GatewayDescriptor descriptor() const override {
        return {GatewayKind::eval_text_encoder, "synth-eval-text", kMotionFeatureDim, 8, true};
    }
    std::vector<double> encode(std::string_view text) override { return motion_features(synth_generate(text, 0)); }
};

struct SynthGatewayOptions {
    bool cache_enabled = true;
    std::optional<std::filesystem::path> disk_cache;
};

inline std::shared_ptr<VictimGateway> synth_victim_gateway(const SynthGatewayOptions& opts = {}) {
    return std::make_shared<VictimGateway>(std::make_shared<SynthVictim>(),
                                           CacheOptions{opts.cache_enabled, opts.disk_cache});
}

inline std::shared_ptr<MotionEncoderGateway> synth_motion_gateway(bool cache_enabled = true) {
    return std::make_shared<MotionEncoderGateway>(std::make_shared<SynthMotionEncoder>(), FeatureSpace::motion,
                                                  cache_enabled);
}

inline std::shared_ptr<TextEncoderGateway> synth_text_gateway(bool cache_enabled = true) {
    return std::make_shared<TextEncoderGateway>(std::make_shared<SynthTextEncoder>(), FeatureSpace::text,
                                                cache_enabled);
}

inline std::shared_ptr<MotionEncoderGateway> synth_eval_motion_gateway() {
    return std::make_shared<MotionEncoderGateway>(
        std::make_shared<SynthMotionEncoder>(GatewayKind::eval_motion_encoder), FeatureSpace::eval_motion);
}

inline std::shared_ptr<TextEncoderGateway> synth_eval_text_gateway() {
    return std::make_shared<TextEncoderGateway>(std::make_shared<SynthEvalTextEncoder>(), FeatureSpace::eval_text);
}

}  // namespace prompt_siege::testbed
