#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <set>

#include "prompt_siege/cli/commands.hpp"

namespace ps_test {

using namespace prompt_siege;

// Single-joint clip from a list of root positions.
inline MotionClip path_clip(const std::vector<Vec3>& roots, double fps = 1.0) {
    std::vector<double> data;
    for (const auto& r : roots) data.insert(data.end(), {r.x, r.y, r.z});
    return MotionClip(roots.size(), 1, fps, std::move(data));
}

inline MotionClip random_clip(std::mt19937_64& rng, std::size_t T = 12, std::size_t J = 2) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> data(T * J * 3);
    for (auto& v : data) v = u(rng);
    return MotionClip(T, J, 20.0, std::move(data));
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("prompt-siege-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string numbered(const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) out += std::to_string(i + 1) + ". " + lines[i] + "\n";
    return out;
}

// Victim that returns a fixed clip per text and fails on request.
class TableVictim : public VictimBackend {
public:
    std::map<std::string, MotionClip> table;
    std::set<std::string> failing;
    std::atomic<int> calls{0};

    GatewayDescriptor descriptor() const override { return {GatewayKind::victim, "table", std::nullopt, 4, true}; }
    MotionClip generate(std::string_view prompt, std::uint64_t seed) override {
        ++calls;
        if (failing.contains(std::string(prompt))) throw QueryFailure("victim", "scripted failure");
        auto it = table.find(std::string(prompt));
        if (it != table.end()) return it->second;
        return testbed::synth_generate(prompt, seed);
    }
};

inline AttackGateways testbed_gateways(std::shared_ptr<LlmBackend> llm, bool cache = true) {
    AttackGateways gw;
    gw.victim = testbed::synth_victim_gateway({cache, std::nullopt});
    gw.motion_encoder = testbed::synth_motion_gateway(cache);
    gw.text_encoder = testbed::synth_text_gateway(cache);
    if (llm) gw.llm = std::make_shared<LlmGateway>(std::move(llm));
    return gw;
}

inline EvalGateways testbed_eval_gateways(bool with_ppl = true) {
    EvalGateways gw;
    gw.eval_motion = testbed::synth_eval_motion_gateway();
    gw.eval_text = testbed::synth_eval_text_gateway();
    gw.similarity_text = testbed::synth_text_gateway();
    if (with_ppl) gw.ppl = trigram_ppl_gateway();
    return gw;
}

inline AttackConfig scenario_config(std::uint64_t run_seed = 7, std::uint32_t K = 10, std::uint32_t N = 20) {
    AttackConfig c;
    c.K = K;
    c.N = N;
    c.eta = 0.4;
    c.run_seed = run_seed;
    return c;
}

inline AttackRunRecord run_scenario(const std::string& name, const AttackConfig& cfg, bool cache = true) {
    const auto& sc = testbed::scenario(name);
    auto c = cfg;
    if (!c.initial_prompt) c.initial_prompt = sc.initial_prompt;
    auto gw = testbed_gateways(std::make_shared<testbed::HeuristicLlmBackend>(0), cache);
    return run_attack(sc.target(), sc.target_motion(c.run_seed), c, TemplateSet::defaults(), gw);
}

// Fully scripted K=2, N=2 run. Every LLM instruction is known in advance and
// the victim maps each refined prompt to a hand-built clip, so every score
// and the contrast block are exact.
struct ScriptedTrace {
    static constexpr const char* kInitial = "a person waves";
    static constexpr const char* kTarget = "a person jumps in place";
    std::vector<std::string> expanded{"a person waves slowly", "a person waves twice"};
    std::vector<std::string> refined1{"someone leaps upward", "someone salutes"};
    std::vector<std::string> updated{"someone leaps high", "someone bounces"};
    std::vector<std::string> refined2{"a figure leaps high", "a figure bounces"};

    // Target features (1,0,0,1,0,0,0,1); the orthogonal clip scores exactly 0.
    MotionClip target_motion = path_clip({{0, 0, 0}, {0, 0, 1}});
    MotionClip orthogonal = path_clip({{0, 0, 0}, {0, 0, -1}, {0, 0, -1}});

    std::shared_ptr<ScriptedLlm> llm = std::make_shared<ScriptedLlm>();
    std::shared_ptr<TableVictim> victim = std::make_shared<TableVictim>();
    TemplateSet templates = TemplateSet::defaults();

    ScriptedTrace() {
        llm->add(templates.expand.render({{"N", "2"}, {"initial_prompt", kInitial}}), {numbered(expanded)});
        llm->add(templates.refine.render({{"N", "2"}, {"prompt_list", "1. " + expanded[0] + "\n2. " + expanded[1]}}),
                 {numbered(refined1)});
        const std::string contrast = "1. \"" + refined1[0] + "\" | motion_similarity=1.0000\n2. \"" + refined1[1] +
                                     "\" | motion_similarity=0.0000";
        llm->add(templates.update.render({{"N", "2"}, {"contrast_block", contrast}}), {numbered(updated)});
        llm->add(templates.refine.render({{"N", "2"}, {"prompt_list", "1. " + updated[0] + "\n2. " + updated[1]}}),
                 {numbered(refined2)});
        victim->table.emplace(refined1[0], target_motion);
        victim->table.emplace(refined1[1], orthogonal);
        victim->table.emplace(refined2[0], target_motion);
        victim->table.emplace(refined2[1], orthogonal);
    }

    AttackConfig config(std::uint32_t K = 2) const {
        AttackConfig c;
        c.K = K;
        c.N = 2;
        c.eta = 1.0;
        c.run_seed = 1;
        c.initial_prompt = kInitial;
        return c;
    }

    AttackGateways gateways() const {
        AttackGateways gw;
        gw.victim = std::make_shared<VictimGateway>(victim);
        gw.motion_encoder = testbed::synth_motion_gateway();
        gw.text_encoder = testbed::synth_text_gateway();
        gw.llm = std::make_shared<LlmGateway>(llm);
        return gw;
    }

    AttackRunRecord run(std::uint32_t K = 2) const {
        return run_attack(Prompt::initial(kTarget), target_motion, config(K), templates, gateways());
    }
};

}  // namespace ps_test
