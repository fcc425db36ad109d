#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "prompt_siege/core/motion_io.hpp"
#include "prompt_siege/core/serialize.hpp"
#include "prompt_siege/core/types.hpp"

namespace prompt_siege {

enum class GatewayKind {
    victim,
    motion_encoder,
    text_encoder,
    llm,
    eval_motion_encoder,
    eval_text_encoder,
    ppl_scorer
};

inline std::string_view to_string(GatewayKind k) {
    switch (k) {
        case GatewayKind::victim: return "victim";
        case GatewayKind::motion_encoder: return "motion_encoder";
        case GatewayKind::text_encoder: return "text_encoder";
        case GatewayKind::llm: return "llm";
        case GatewayKind::eval_motion_encoder: return "eval_motion_encoder";
        case GatewayKind::eval_text_encoder: return "eval_text_encoder";
        case GatewayKind::ppl_scorer: return "ppl_scorer";
    }
    return "?";
}

inline GatewayKind gateway_kind_from_string(std::string_view s) {
    for (auto k : {GatewayKind::victim, GatewayKind::motion_encoder, GatewayKind::text_encoder,
                   GatewayKind::llm, GatewayKind::eval_motion_encoder, GatewayKind::eval_text_encoder,
                   GatewayKind::ppl_scorer}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown gateway kind '" + std::string(s) + "'");
}

inline bool is_encoder_kind(GatewayKind k) {
    return k == GatewayKind::motion_encoder || k == GatewayKind::text_encoder ||
           k == GatewayKind::eval_motion_encoder || k == GatewayKind::eval_text_encoder;
}

struct GatewayDescriptor {
    GatewayKind kind;
    std::string name;
    std::optional<std::size_t> feature_dim;
    std::size_t concurrency_capacity = 1;
    bool deterministic = true;

    void validate() const {
        if (is_encoder_kind(kind) && !feature_dim) {
            throw ConfigError("gateway " + name + ": encoder descriptor needs feature_dim");
        }
        if (concurrency_capacity < 1) {
            throw ConfigError("gateway " + name + ": concurrency_capacity must be ≥ 1");
        }
    }
};

// ---------------------------------------------------------------------------
// Backends: the raw model boundary. Gateways wrap them with validation,
// caching and capacity control.
// ---------------------------------------------------------------------------

class VictimBackend {
public:
    virtual ~VictimBackend() = default;
    virtual GatewayDescriptor descriptor() const = 0;
    virtual MotionClip generate(std::string_view prompt, std::uint64_t seed) = 0;
};

class MotionEncoderBackend {
public:
    virtual ~MotionEncoderBackend() = default;
    virtual GatewayDescriptor descriptor() const = 0;
    virtual std::vector<double> encode(const MotionClip& clip) = 0;
};

class TextEncoderBackend {
public:
    virtual ~TextEncoderBackend() = default;
    virtual GatewayDescriptor descriptor() const = 0;
    virtual std::vector<double> encode(std::string_view text) = 0;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual GatewayDescriptor descriptor() const = 0;
    virtual std::string complete(std::string_view instruction) = 0;
};

class PerplexityBackend {
public:
    virtual ~PerplexityBackend() = default;
    virtual GatewayDescriptor descriptor() const = 0;
    // Negative log-likelihood (nats) of each token of `text`.
    virtual std::vector<double> token_nll(std::string_view text) = 0;
};

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

/// Low 64 bits of SHA-256(le64(run_seed) || utf8(text)).
inline std::uint64_t seed_for(std::uint64_t run_seed, std::string_view text) {
    return low64(Sha256{}.update_u64(run_seed).update(text).finish());
}

inline std::uint64_t seed_for(std::uint64_t run_seed, const Prompt& prompt) {
    return seed_for(run_seed, prompt.text());
}

// ---------------------------------------------------------------------------
// Query cache
// ---------------------------------------------------------------------------

template <typename Value>
struct QueryCacheEntry {
    std::string key;
    Value value;
    std::string created_at;
};

/// Thread-safe in-memory cache; identical keys always carry identical values,
/// so concurrent writers race harmlessly (last writer wins).
template <typename Value>
class QueryCache {
public:
    std::optional<Value> find(const std::string& key) const {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second.value;
    }

    void store(const std::string& key, Value value) {
        std::unique_lock lock(mutex_);
        entries_.insert_or_assign(key, QueryCacheEntry<Value>{key, std::move(value), utc_timestamp()});
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

private:
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, QueryCacheEntry<Value>> entries_;
};

inline std::string cache_key(std::string_view gateway, std::string_view payload_digest, std::uint64_t seed) {
    return to_hex(Sha256{}.update(gateway).update("\x1f").update(payload_digest).update("\x1f").update_u64(seed).finish());
}

struct CacheOptions {
    bool enabled = true;
    // Persists victim responses across runs, keyed identically to memory.
    std::optional<std::filesystem::path> disk_dir;
};

// Limits concurrent calls into a backend to its declared capacity.
class CapacityGate {
public:
    explicit CapacityGate(std::size_t capacity)
        : sem_(static_cast<std::ptrdiff_t>(std::min<std::size_t>(capacity, 1024))) {}
    template <typename F>
    auto run(F&& f) {
        sem_.acquire();
        struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
        } release{sem_};
        return f();
    }

private:
    std::counting_semaphore<1024> sem_;
};

// ---------------------------------------------------------------------------
// Victim gateway
// ---------------------------------------------------------------------------

class VictimGateway {
public:
    struct Result {
        MotionClip clip;
        bool cache_hit;
    };

    explicit VictimGateway(std::shared_ptr<VictimBackend> backend, CacheOptions cache = {})
        : backend_(std::move(backend)),
          desc_(backend_->descriptor()),
          cache_opts_(std::move(cache)),
          gate_(desc_.concurrency_capacity) {
        desc_.validate();
        if (cache_opts_.disk_dir) std::filesystem::create_directories(*cache_opts_.disk_dir);
    }

    const GatewayDescriptor& descriptor() const noexcept { return desc_; }

    std::string key_for(std::string_view text, std::uint64_t seed) const {
        return cache_key(desc_.name, sha256_hex(text), seed);
    }

    bool is_cached(std::string_view text, std::uint64_t seed) const {
        if (!cache_opts_.enabled) return false;
        const auto key = key_for(text, seed);
        return cache_.find(key).has_value() || (cache_opts_.disk_dir && std::filesystem::exists(disk_path(key)));
    }

    Result query(std::string_view text, std::uint64_t seed) {
        if (trim(text).empty()) throw ValidationError("victim prompt is empty");
        const auto key = key_for(text, seed);
        if (cache_opts_.enabled) {
            if (auto hit = cache_.find(key)) return {*hit, true};
            if (cache_opts_.disk_dir) {
                const auto path = disk_path(key);
                if (std::filesystem::exists(path)) {
                    MotionClip clip = load_clip(path.string());
                    cache_.store(key, clip);
                    return {clip, true};
                }
            }
        }
        std::optional<MotionClip> clip;
        gate_.run([&] {
            try {
                clip.emplace(backend_->generate(text, seed));
            } catch (const ValidationError& e) {
                throw ProtocolError("victim", std::string("returned a malformed clip: ") + e.what());
            }
            return 0;
        });
        invocations_.fetch_add(1);
        if (cache_opts_.enabled) {
            cache_.store(key, *clip);
            if (cache_opts_.disk_dir) {
                const auto path = disk_path(key);
                const auto tmp = path.string() + ".tmp" + std::to_string(invocations_.load());
                save_clip(tmp, *clip);
                std::filesystem::rename(tmp, path);
            }
        }
        return {*clip, false};
    }

    std::size_t invocations() const noexcept { return invocations_.load(); }
    bool cache_enabled() const noexcept { return cache_opts_.enabled; }

private:
    std::filesystem::path disk_path(const std::string& key) const { return *cache_opts_.disk_dir / (key + ".clip"); }

    std::shared_ptr<VictimBackend> backend_;
    GatewayDescriptor desc_;
    CacheOptions cache_opts_;
    CapacityGate gate_;
    QueryCache<MotionClip> cache_;
    std::atomic<std::size_t> invocations_{0};
};

inline MotionClip victim_generate(const Prompt& prompt, std::uint64_t seed, VictimGateway& gateway) {
    return gateway.query(prompt.text(), seed).clip;
}

// ---------------------------------------------------------------------------
// Encoder gateways
// ---------------------------------------------------------------------------

namespace detail {

inline FeatureVector checked_features(std::vector<double> values, const GatewayDescriptor& desc,
                                      FeatureSpace space) {
    const std::string kind(to_string(desc.kind));
    if (desc.feature_dim && values.size() != *desc.feature_dim) {
        throw ProtocolError(kind, "returned a vector of dimension " + std::to_string(values.size()) +
                                      ", descriptor says " + std::to_string(*desc.feature_dim));
    }
    try {
        return FeatureVector(std::move(values), space);
    } catch (const ValidationError& e) {
        throw ProtocolError(kind, std::string("returned an invalid vector: ") + e.what());
    }
}

}  // namespace detail

class MotionEncoderGateway {
public:
    MotionEncoderGateway(std::shared_ptr<MotionEncoderBackend> backend, FeatureSpace space,
                         bool cache_enabled = true)
        : backend_(std::move(backend)),
          desc_(backend_->descriptor()),
          space_(space),
          cache_enabled_(cache_enabled),
          gate_(desc_.concurrency_capacity) {
        desc_.validate();
    }

    const GatewayDescriptor& descriptor() const noexcept { return desc_; }
    FeatureSpace space() const noexcept { return space_; }

    FeatureVector encode(const MotionClip& clip) {
        const auto key = cache_key(desc_.name, clip.id(), 0);
        if (cache_enabled_) {
            if (auto hit = cache_.find(key)) return *hit;
        }
        auto values = gate_.run([&] { return backend_->encode(clip); });
        auto fv = detail::checked_features(std::move(values), desc_, space_);
        if (cache_enabled_) cache_.store(key, fv);
        return fv;
    }

private:
    std::shared_ptr<MotionEncoderBackend> backend_;
    GatewayDescriptor desc_;
    FeatureSpace space_;
    bool cache_enabled_;
    CapacityGate gate_;
    QueryCache<FeatureVector> cache_;
};

class TextEncoderGateway {
public:
    TextEncoderGateway(std::shared_ptr<TextEncoderBackend> backend, FeatureSpace space,
                       bool cache_enabled = true)
        : backend_(std::move(backend)),
          desc_(backend_->descriptor()),
          space_(space),
          cache_enabled_(cache_enabled),
          gate_(desc_.concurrency_capacity) {
        desc_.validate();
    }

    const GatewayDescriptor& descriptor() const noexcept { return desc_; }
    FeatureSpace space() const noexcept { return space_; }

    FeatureVector encode(std::string_view text) {
        if (trim(text).empty()) throw ValidationError("text encoder input is empty");
        const auto key = cache_key(desc_.name, sha256_hex(text), 0);
        if (cache_enabled_) {
            if (auto hit = cache_.find(key)) return *hit;
        }
        auto values = gate_.run([&] { return backend_->encode(text); });
        auto fv = detail::checked_features(std::move(values), desc_, space_);
        if (cache_enabled_) cache_.store(key, fv);
        return fv;
    }

private:
    std::shared_ptr<TextEncoderBackend> backend_;
    GatewayDescriptor desc_;
    FeatureSpace space_;
    bool cache_enabled_;
    CapacityGate gate_;
    QueryCache<FeatureVector> cache_;
};

inline FeatureVector encode_motion(const MotionClip& clip, MotionEncoderGateway& gateway) {
    return gateway.encode(clip);
}

inline FeatureVector encode_text(const Prompt& prompt, TextEncoderGateway& gateway) {
    return gateway.encode(prompt.text());
}

// ---------------------------------------------------------------------------
// LLM and perplexity gateways
// ---------------------------------------------------------------------------

class LlmGateway {
public:
    explicit LlmGateway(std::shared_ptr<LlmBackend> backend)
        : backend_(std::move(backend)), desc_(backend_->descriptor()), gate_(desc_.concurrency_capacity) {
        desc_.validate();
    }

    const GatewayDescriptor& descriptor() const noexcept { return desc_; }

    // Empty completions pass through; the response parser decides.
    std::string complete(std::string_view instruction) {
        if (trim(instruction).empty()) throw ValidationError("llm instruction is empty");
        return gate_.run([&] { return backend_->complete(instruction); });
    }

private:
    std::shared_ptr<LlmBackend> backend_;
    GatewayDescriptor desc_;
    CapacityGate gate_;
};

inline std::string llm_complete(std::string_view instruction, LlmGateway& gateway) {
    return gateway.complete(instruction);
}

class PerplexityGateway {
public:
    explicit PerplexityGateway(std::shared_ptr<PerplexityBackend> backend)
        : backend_(std::move(backend)), desc_(backend_->descriptor()), gate_(desc_.concurrency_capacity) {
        desc_.validate();
    }

    const GatewayDescriptor& descriptor() const noexcept { return desc_; }

    std::vector<double> token_nll(std::string_view text) {
        auto nll = gate_.run([&] { return backend_->token_nll(text); });
        for (double v : nll) {
            if (!std::isfinite(v) || v < 0) {
                throw ProtocolError("ppl_scorer", "returned an invalid negative log-likelihood");
            }
        }
        return nll;
    }

private:
    std::shared_ptr<PerplexityBackend> backend_;
    GatewayDescriptor desc_;
    CapacityGate gate_;
};

// ---------------------------------------------------------------------------
// Bundles handed to the attack and evaluation layers
// ---------------------------------------------------------------------------

struct AttackGateways {
    std::shared_ptr<VictimGateway> victim;
    std::shared_ptr<MotionEncoderGateway> motion_encoder;
    std::shared_ptr<TextEncoderGateway> text_encoder;
    std::shared_ptr<LlmGateway> llm;
};

struct EvalGateways {
    std::shared_ptr<MotionEncoderGateway> eval_motion;
    std::shared_ptr<TextEncoderGateway> eval_text;
    // Text encoder used for adversarial similarity.
    std::shared_ptr<TextEncoderGateway> similarity_text;
    std::shared_ptr<PerplexityGateway> ppl;
};

// ---------------------------------------------------------------------------
// Simple backends for wiring tests and custom integrations
// ---------------------------------------------------------------------------

class CallbackLlm : public LlmBackend {
public:
    using Fn = std::function<std::string(std::string_view)>;
    CallbackLlm(std::string name, Fn fn, bool deterministic = true)
        : name_(std::move(name)), fn_(std::move(fn)), deterministic_(deterministic) {}
    GatewayDescriptor descriptor() const override {
        return {GatewayKind::llm, name_, std::nullopt, 1, deterministic_};
    }
    std::string complete(std::string_view instruction) override { return fn_(instruction); }

private:
    std::string name_;
    Fn fn_;
    bool deterministic_;
};

/// Replays canned responses keyed by the SHA-256 of the instruction. A digest
/// may map to several responses; they are served in order and the last one
/// repeats.
class ScriptedLlm : public LlmBackend {
public:
    ScriptedLlm() = default;

    void add(std::string_view instruction, std::vector<std::string> responses) {
        add_digest(sha256_hex(instruction), std::move(responses));
    }

    void add_digest(std::string digest, std::vector<std::string> responses) {
        if (responses.empty()) throw ConfigError("scripted llm entry needs at least one response");
        std::lock_guard lock(mutex_);
        table_[std::move(digest)] = Entry{std::move(responses), 0};
    }

    // {"format":"scripted-llm/1","responses":{"<sha256 hex>": "text" | ["text", ...]}}
    static std::shared_ptr<ScriptedLlm> from_json(const json& doc) {
        if (doc.value("format", "") != "scripted-llm/1") {
            throw ConfigError("scripted llm table: expected format scripted-llm/1");
        }
        auto llm = std::make_shared<ScriptedLlm>();
        for (const auto& [digest, value] : doc.at("responses").items()) {
            if (value.is_string()) {
                llm->add_digest(digest, {value.get<std::string>()});
            } else {
                llm->add_digest(digest, value.get<std::vector<std::string>>());
            }
        }
        return llm;
    }

    static std::shared_ptr<ScriptedLlm> load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open scripted llm table " + path);
        return from_json(json::parse(in));
    }

    GatewayDescriptor descriptor() const override {
        return {GatewayKind::llm, "scripted", std::nullopt, 1, true};
    }

    std::string complete(std::string_view instruction) override {
        const auto digest = sha256_hex(instruction);
        std::lock_guard lock(mutex_);
        auto it = table_.find(digest);
        if (it == table_.end()) throw GatewayError("llm", "unscripted input " + digest);
        auto& e = it->second;
        const auto& out = e.responses[std::min(e.next, e.responses.size() - 1)];
        ++e.next;
        return out;
    }

private:
    struct Entry {
        std::vector<std::string> responses;
        std::size_t next = 0;
    };
    std::mutex mutex_;
    std::map<std::string, Entry> table_;
};

}  // namespace prompt_siege
