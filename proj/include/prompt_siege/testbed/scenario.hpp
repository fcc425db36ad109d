#pragma once

#include "prompt_siege/testbed/baseline.hpp"
#include "prompt_siege/testbed/heuristic_llm.hpp"

namespace prompt_siege::testbed {

struct Scenario {
    std::string name;
    std::string target_prompt;
    std::string initial_prompt;

    Prompt target() const { return Prompt::initial(target_prompt); }

    // The victim's own answer to the target prompt under the run seed.
    MotionClip target_motion(std::uint64_t run_seed) const {
        return synth_generate(target_prompt, seed_for(run_seed, target_prompt));
    }
};

/// "walk-to-jump" plus suite-00 .. suite-19, a 20-item batch for evaluation.
inline const std::vector<Scenario>& scenarios() {
    static const std::vector<Scenario> all = [] {
        std::vector<Scenario> v{{"walk-to-jump", "a person jumps in place", "a person waves"}};
        const auto& prims = PrimitiveTable::builtin().primitives();
        const std::size_t P = prims.size();
        for (std::size_t i = 0; i < 20; ++i) {
            std::string target = "a person " + prims[i % P].synonyms.front();
            if (i >= P) target += " and then " + prims[(3 * i + 1) % P].synonyms.front();
            target += " in place";
            char name[16];
            std::snprintf(name, sizeof name, "suite-%02zu", i);
            v.push_back({name, target, "a person " + prims[(i + 3) % P].synonyms.front()});
        }
        return v;
    }();
    return all;
}

inline const Scenario& scenario(std::string_view name) {
    for (const auto& s : scenarios()) {
        if (s.name == name) return s;
    }
    throw ConfigError("unknown testbed scenario '" + std::string(name) + "'");
}

inline std::vector<const Scenario*> suite() {
    std::vector<const Scenario*> out;
    for (const auto& s : scenarios()) {
        if (s.name.starts_with("suite-")) out.push_back(&s);
    }
    return out;
}

struct SynthOptions {
    std::uint64_t llm_seed = 0;
    bool cache_enabled = true;
    std::optional<std::filesystem::path> disk_cache;
};

/// Attack-side gateways backed entirely by the testbed.
inline AttackGateways synth_attack_gateways(const SynthOptions& opts = {}) {
    AttackGateways gw;
    gw.victim = synth_victim_gateway({opts.cache_enabled, opts.disk_cache});
    gw.motion_encoder = synth_motion_gateway(opts.cache_enabled);
    gw.text_encoder = synth_text_gateway(opts.cache_enabled);
    gw.llm = std::make_shared<LlmGateway>(std::make_shared<HeuristicLlmBackend>(opts.llm_seed));
    return gw;
}

}  // namespace prompt_siege::testbed
