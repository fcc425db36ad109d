#pragma once

#include <filesystem>
#include <fstream>

#include "prompt_siege/eval/report.hpp"
#include "prompt_siege/gateway/remote.hpp"
#include "prompt_siege/testbed/scenario.hpp"

namespace prompt_siege::cli {

namespace fs = std::filesystem;

inline constexpr std::string_view kManifestSchema = "prompt-siege-manifest/1";

/// One gateway binding: a builtin backend by name, a scripted LLM table, or a
/// remote process speaking the line protocol.
struct GatewayBinding {
    enum class Source { builtin, scripted, remote };
    Source source = Source::builtin;
    std::string builtin;
    std::uint64_t seed = 0;  // heuristic LLM only
    fs::path scripted;
    RemoteEndpoint remote;
};

struct TargetSpec {
    std::optional<std::string> scenario;
    std::optional<std::string> prompt;
    std::optional<fs::path> motion;
};

struct CacheSpec {
    bool enabled = true;
    std::optional<fs::path> dir;
};

struct RunManifest {
    AttackConfig config;
    std::map<std::string, GatewayBinding> gateways;
    std::map<std::string, fs::path> templates;
    TargetSpec target;
    fs::path output_dir = "out";
    CacheSpec cache;
    std::vector<fs::path> real_motions;
    json source;  // the document as read, for the output bundle
};

// Binding keys: the gateway kinds plus the optional encoder used for adversarial similarity.
inline const std::vector<std::string>& binding_keys() {
    static const std::vector<std::string> keys = {"victim",        "motion_encoder",      "text_encoder",
                                                  "llm",           "eval_motion_encoder", "eval_text_encoder",
                                                  "ppl_scorer",    "similarity_text_encoder"};
    return keys;
}

namespace detail {

inline void reject_unknown(const json& obj, const std::vector<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline GatewayBinding binding_from_json(const std::string& key, const json& j, const fs::path& base) {
    GatewayBinding b;
    if (j.is_string()) {
        b.builtin = j.get<std::string>();
        return b;
    }
    const std::string where = "gateways." + key;
    reject_unknown(j, {"builtin", "seed", "scripted", "remote"}, where);
    const int forms = j.contains("builtin") + j.contains("scripted") + j.contains("remote");
    if (forms != 1) throw ConfigError(where + " needs exactly one of builtin, scripted, remote");
    if (j.contains("builtin")) {
        b.builtin = j["builtin"].get<std::string>();
        if (j.contains("seed")) b.seed = j["seed"].get<std::uint64_t>();
    } else if (j.contains("scripted")) {
        if (key != "llm") throw ConfigError(where + ": scripted bindings are only for llm");
        b.source = GatewayBinding::Source::scripted;
        b.scripted = resolve(base, j["scripted"].get<std::string>());
    } else {
        const auto& r = j["remote"];
        reject_unknown(r, {"command", "credential_env", "name", "feature_dim"}, where + ".remote");
        b.source = GatewayBinding::Source::remote;
        b.remote.command = r.at("command").get<std::vector<std::string>>();
        if (b.remote.command.empty()) throw ConfigError(where + ".remote.command is empty");
        if (r.contains("credential_env")) b.remote.credential_env = r["credential_env"].get<std::string>();
        b.remote.name = r.value("name", "remote-" + key);
        if (r.contains("feature_dim")) b.remote.feature_dim = r["feature_dim"].get<std::size_t>();
    }
    return b;
}

}  // namespace detail

inline RunManifest manifest_from_json(const json& doc, const fs::path& base = ".") {
    detail::reject_unknown(doc, {"schema", "config", "gateways", "templates", "target", "output_dir", "cache", "real_motions"},
                           "manifest");
    if (doc.value("schema", "") != kManifestSchema) {
        throw ConfigError("manifest schema must be " + std::string(kManifestSchema));
    }
    RunManifest m;
    m.source = doc;
    try {
        if (doc.contains("config")) m.config = attack_config_from_json(doc["config"]);
        if (doc.contains("gateways")) {
            detail::reject_unknown(doc["gateways"], binding_keys(), "gateways");
            for (const auto& [key, value] : doc["gateways"].items()) {
                m.gateways[key] = detail::binding_from_json(key, value, base);
            }
        }
        if (doc.contains("templates")) {
            detail::reject_unknown(doc["templates"], {"expand", "refine", "update", "bootstrap"}, "templates");
            for (const auto& [key, value] : doc["templates"].items()) {
                m.templates[key] = detail::resolve(base, value.get<std::string>());
            }
        }
        if (doc.contains("target")) {
            const auto& t = doc["target"];
            detail::reject_unknown(t, {"scenario", "prompt", "motion"}, "target");
            if (t.contains("scenario")) m.target.scenario = t["scenario"].get<std::string>();
            if (t.contains("prompt")) m.target.prompt = t["prompt"].get<std::string>();
            if (t.contains("motion")) m.target.motion = detail::resolve(base, t["motion"].get<std::string>());
            if (m.target.scenario && (m.target.prompt || m.target.motion)) {
                throw ConfigError("target takes either scenario or prompt+motion");
            }
            if (!m.target.scenario && (!m.target.prompt || !m.target.motion)) {
                throw ConfigError("target needs scenario, or both prompt and motion");
            }
        }
        if (doc.contains("output_dir")) m.output_dir = detail::resolve(base, doc["output_dir"].get<std::string>());
        if (doc.contains("cache")) {
            const auto& c = doc["cache"];
            detail::reject_unknown(c, {"enabled", "dir"}, "cache");
            m.cache.enabled = c.value("enabled", true);
            if (c.contains("dir") && !c["dir"].is_null()) m.cache.dir = detail::resolve(base, c["dir"].get<std::string>());
        }
        if (doc.contains("real_motions")) {
            for (const auto& p : doc["real_motions"]) m.real_motions.push_back(detail::resolve(base, p.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    validate_config(m.config);
    return m;
}

inline RunManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("manifest " + path.string() + ": " + e.what());
    }
    return manifest_from_json(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// Binding resolution
// ---------------------------------------------------------------------------

namespace detail {

inline const GatewayBinding* find_binding(const RunManifest& m, const std::string& key) {
    auto it = m.gateways.find(key);
    return it == m.gateways.end() ? nullptr : &it->second;
}

[[noreturn]] inline void unknown_builtin(const std::string& key, const std::string& name) {
    throw ConfigError("gateway " + key + ": unknown builtin '" + name + "'");
}

inline std::size_t remote_dim(const std::string& key, const GatewayBinding& b) {
    if (!b.remote.feature_dim) throw ConfigError("gateway " + key + ": remote encoder needs feature_dim");
    return *b.remote.feature_dim;
}

}  // namespace detail

struct BuiltGateways {
    AttackGateways attack;
    EvalGateways eval;
};

/// Instantiates every bound gateway. Unbound kinds stay null; commands check
/// what they need.
inline BuiltGateways build_gateways(const RunManifest& m) {
    BuiltGateways out;
    const CacheOptions cache{m.cache.enabled, m.cache.dir ? std::optional<fs::path>(*m.cache.dir / "victim") : std::nullopt};
    using Src = GatewayBinding::Source;

    if (auto* b = detail::find_binding(m, "victim")) {
        std::shared_ptr<VictimBackend> backend;
        if (b->source == Src::remote) {
            backend = std::make_shared<RemoteVictim>(b->remote);
        } else if (b->builtin == "synth") {
            backend = std::make_shared<testbed::SynthVictim>();
        } else {
            detail::unknown_builtin("victim", b->builtin);
        }
        out.attack.victim = std::make_shared<VictimGateway>(backend, cache);
    }

    auto motion_encoder = [&](const std::string& key, GatewayKind kind, FeatureSpace space)
        -> std::shared_ptr<MotionEncoderGateway> {
        auto* b = detail::find_binding(m, key);
        if (!b) return nullptr;
        std::shared_ptr<MotionEncoderBackend> backend;
        if (b->source == Src::remote) {
            backend = std::make_shared<RemoteMotionEncoder>(b->remote.name, detail::remote_dim(key, *b),
                                                            open_endpoint(b->remote, key), kind);
        } else if (b->builtin == "synth") {
            backend = std::make_shared<testbed::SynthMotionEncoder>(kind);
        } else {
            detail::unknown_builtin(key, b->builtin);
        }
        return std::make_shared<MotionEncoderGateway>(backend, space, m.cache.enabled);
    };
    out.attack.motion_encoder = motion_encoder("motion_encoder", GatewayKind::motion_encoder, FeatureSpace::motion);
    out.eval.eval_motion = motion_encoder("eval_motion_encoder", GatewayKind::eval_motion_encoder, FeatureSpace::eval_motion);

    auto text_encoder = [&](const std::string& key, GatewayKind kind, FeatureSpace space)
        -> std::shared_ptr<TextEncoderGateway> {
        auto* b = detail::find_binding(m, key);
        if (!b) return nullptr;
        std::shared_ptr<TextEncoderBackend> backend;
        if (b->source == Src::remote) {
            backend = std::make_shared<RemoteTextEncoder>(b->remote.name, detail::remote_dim(key, *b),
                                                          open_endpoint(b->remote, key), kind);
        } else if (b->builtin == "synth" && kind == GatewayKind::eval_text_encoder) {
            backend = std::make_shared<testbed::SynthEvalTextEncoder>();
        } else if (b->builtin == "synth") {
            backend = std::make_shared<testbed::SynthTextEncoder>();
        } else {
            detail::unknown_builtin(key, b->builtin);
        }
        return std::make_shared<TextEncoderGateway>(backend, space, m.cache.enabled);
    };
    out.attack.text_encoder = text_encoder("text_encoder", GatewayKind::text_encoder, FeatureSpace::text);
    out.eval.eval_text = text_encoder("eval_text_encoder", GatewayKind::eval_text_encoder, FeatureSpace::eval_text);
    out.eval.similarity_text = text_encoder("similarity_text_encoder", GatewayKind::text_encoder, FeatureSpace::text);
    if (!out.eval.similarity_text) out.eval.similarity_text = out.attack.text_encoder;

    if (auto* b = detail::find_binding(m, "llm")) {
        std::shared_ptr<LlmBackend> backend;
        if (b->source == Src::remote) {
            backend = std::make_shared<RemoteLlm>(b->remote);
        } else if (b->source == Src::scripted) {
            backend = ScriptedLlm::load(b->scripted.string());
        } else if (b->builtin == "heuristic") {
            backend = std::make_shared<testbed::HeuristicLlmBackend>(b->seed);
        } else {
            detail::unknown_builtin("llm", b->builtin);
        }
        out.attack.llm = std::make_shared<LlmGateway>(backend);
    }

    if (auto* b = detail::find_binding(m, "ppl_scorer")) {
        if (b->source == Src::remote) {
            out.eval.ppl = std::make_shared<PerplexityGateway>(
                std::make_shared<RemotePerplexity>(b->remote.name, open_endpoint(b->remote, "ppl_scorer")));
        } else if (b->builtin == "trigram") {
            out.eval.ppl = trigram_ppl_gateway();
        } else {
            detail::unknown_builtin("ppl_scorer", b->builtin);
        }
    }
    return out;
}

inline TemplateSet load_templates(const RunManifest& m) {
    TemplateSet t = TemplateSet::defaults();
    for (const auto& [key, path] : m.templates) {
        const auto kind = instruction_kind_from_string(key);
        auto loaded = InstructionTemplate::load(kind, path.string());
        switch (kind) {
            case InstructionKind::expand: t.expand = std::move(loaded); break;
            case InstructionKind::refine: t.refine = std::move(loaded); break;
            case InstructionKind::update: t.update = std::move(loaded); break;
            case InstructionKind::bootstrap: t.bootstrap = std::move(loaded); break;
        }
    }
    return t;
}

struct ResolvedTarget {
    Prompt prompt;
    MotionClip motion;
};

/// Target prompt and motion. A scenario also supplies the initial prompt when
/// the config leaves it open.
inline ResolvedTarget resolve_target(RunManifest& m) {
    if (m.target.scenario) {
        const auto& sc = testbed::scenario(*m.target.scenario);
        if (!m.config.initial_prompt && !m.config.bootstrap_initial) m.config.initial_prompt = sc.initial_prompt;
        return {sc.target(), sc.target_motion(m.config.run_seed)};
    }
    if (!m.target.prompt || !m.target.motion) throw ConfigError("manifest has no target");
    return {Prompt::initial(*m.target.prompt), load_clip(m.target.motion->string())};
}

}  // namespace prompt_siege::cli
