#pragma once

#include <random>
#include <set>

#include "prompt_siege/agent/agent.hpp"
#include "prompt_siege/testbed/synth.hpp"

namespace prompt_siege::testbed {

/// Victim budget a baseline gets when the config sets none: the number of
/// victim queries an agent run with the same K and N can make.
inline std::uint64_t baseline_budget(const AttackConfig& config) {
    if (config.max_victim_queries) return *config.max_victim_queries;
    return static_cast<std::uint64_t>(config.N) * refinement_rounds(config.K);
}

namespace detail {

struct Candidate {
    const ScoredPrompt* scored;
    bool feasible;
};

inline bool fitter(const ScoredPrompt& a, const ScoredPrompt& b, double eta) {
    const bool fa = a.text_sim < eta, fb = b.text_sim < eta;
    if (fa != fb) return fa;
    return a.motion_sim > b.motion_sim;
}

class Perturber {
public:
    Perturber(std::uint64_t seed, const PrimitiveTable& table) : rng_(seed), words_(table.dictionary()) {}

    std::string mutate(const std::string& parent, const std::string& other) {
        auto tokens = tokenize(parent);
        if (tokens.empty()) tokens.push_back(pick_word());
        switch (rng_() % 4) {
            case 0: tokens[rng_() % tokens.size()] = pick_word(); break;
            case 1: tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(rng_() % (tokens.size() + 1)), pick_word()); break;
            case 2: {
                auto& t = tokens[rng_() % tokens.size()];
                t[rng_() % t.size()] = static_cast<char>('a' + rng_() % 26);
                break;
            }
            default: {
                auto rhs = tokenize(other);
                if (rhs.empty()) rhs.push_back(pick_word());
                const std::size_t cut_a = rng_() % (tokens.size() + 1);
                const std::size_t cut_b = rng_() % (rhs.size() + 1);
                tokens.resize(cut_a);
                tokens.insert(tokens.end(), rhs.begin() + static_cast<std::ptrdiff_t>(cut_b), rhs.end());
                if (tokens.empty()) tokens.push_back(pick_word());
            }
        }
        std::string out;
        for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
        return out;
    }

    std::string pick_word() { return words_[rng_() % words_.size()]; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

private:
    std::mt19937_64 rng_;
    std::vector<std::string> words_;
};

}  // namespace detail

/// Hill-climbing word/character perturbation attack under the same victim
/// budget and selection rule as the agent. Each generation draws parents by
/// binary tournament from the N fittest scored prompts (feasible first, then
/// motion similarity) and spends at most N fresh victim queries.
inline AttackRunRecord baseline_perturb_attack(const Prompt& target_prompt, const MotionClip& target_motion,
                                               const AttackConfig& config, const AttackGateways& gw,
                                               const PrimitiveTable& table = PrimitiveTable::builtin()) {
    validate_config(config);
    if (!gw.victim) throw GatewayError("victim", "unbound");
    if (!gw.motion_encoder) throw GatewayError("motion_encoder", "unbound");
    if (!gw.text_encoder) throw GatewayError("text_encoder", "unbound");
    if (!config.initial_prompt) throw ConfigError("baseline needs initial_prompt");

    AttackRunRecord record(config, target_prompt, target_motion, RunMethod::baseline, {});
    record.set_created_at(utc_timestamp());
    const Prompt initial = Prompt::initial(*config.initial_prompt);
    record.append(AgentState(0, StateParity::pre_expansion, {initial}));

    const std::uint64_t budget = baseline_budget(config);
    detail::Perturber perturb(seed_for(config.run_seed, "baseline"), table);
    std::set<std::string> seen{initial.text()};
    std::map<std::string, MotionClip> clips;
    bool exhausted = budget == 0;

    // Generous cap so a warm disk cache (all hits, no budget spent) cannot spin forever.
    const std::uint64_t max_generations = 16 * (budget + 1) + 64;
    for (std::uint64_t gen = 0; !exhausted && gen < max_generations; ++gen) {
        const std::uint64_t step = record.states().size();
        const std::uint64_t remaining = budget - std::min(budget, static_cast<std::uint64_t>(record.victim_queries()));
        if (remaining == 0) break;

        std::vector<const ScoredPrompt*> parents;
        const auto pool = record.scored_pool();
        for (const auto& s : pool) parents.push_back(&s);
        std::stable_sort(parents.begin(), parents.end(),
                         [&](auto* a, auto* b) { return detail::fitter(*a, *b, config.eta); });
        if (parents.size() > config.N) parents.resize(config.N);
        auto tournament = [&]() -> std::string {
            if (parents.empty()) return initial.text();
            const auto* a = parents[perturb.below(parents.size())];
            const auto* b = parents[perturb.below(parents.size())];
            return (detail::fitter(*b, *a, config.eta) ? b : a)->prompt.text();
        };

        const std::size_t batch = static_cast<std::size_t>(std::min<std::uint64_t>(config.N, remaining));
        std::vector<Prompt> children;
        for (std::size_t i = 0; i < batch; ++i) {
            std::string child;
            for (int attempt = 0; attempt < 64; ++attempt) {
                child = std::string(trim(perturb.mutate(tournament(), tournament())));
                if (!child.empty() && !seen.contains(child)) break;
            }
            while (child.empty() || seen.contains(child)) child += (child.empty() ? "" : " ") + perturb.pick_word();
            seen.insert(child);
            children.emplace_back(child, PromptOrigin::baseline, static_cast<std::uint32_t>(step));
        }

        ScoringContext sctx{config.run_seed, step, config.victim_samples, config.parallelism, remaining};
        auto outcome = score_prompt_set(children, target_motion, target_prompt, gw, sctx, false);
        for (auto& q : outcome.queries) record.append(std::move(q));
        for (auto& f : outcome.failures) record.append(std::move(f));
        clips.merge(outcome.clips);
        record.append(AgentState(step, StateParity::post_refinement, std::move(children), std::move(outcome.scores)));
        if (outcome.budget_exhausted) exhausted = true;
    }

    std::optional<ScoredPrompt> best;
    RunStatus status = budget == 0 ? RunStatus::budget_exhausted : RunStatus::completed;
    if (budget > 0) {
        const auto pool = record.scored_pool();
        try {
            if (pool.empty()) throw NoFeasiblePrompt();
            best = select_best(pool, config.eta);
        } catch (const NoFeasiblePrompt&) {
            status = RunStatus::no_feasible_prompt;
        }
    }
    std::optional<MotionClip> best_motion;
    if (best) best_motion = clips.at(best->motion_ref).with_source(best->prompt.id());
    record.finish(status, std::move(best), std::move(best_motion));
    return record;
}

}  // namespace prompt_siege::testbed
