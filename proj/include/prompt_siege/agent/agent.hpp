#pragma once

#include "prompt_siege/agent/response.hpp"
#include "prompt_siege/agent/templates.hpp"
#include "prompt_siege/mmic/contrast.hpp"
#include "prompt_siege/mmic/scoring.hpp"

namespace prompt_siege {

struct PhaseContext {
    std::uint32_t N = 1;
    std::uint32_t retry_limit = 3;
    // Step of the state this phase produces; also the round_index of its prompts.
    std::uint64_t step_index = 1;
    AttackRunRecord* ledger = nullptr;
};

namespace detail {

inline std::string_view phase_failure(InstructionKind kind) {
    switch (kind) {
        case InstructionKind::expand: return "expansion failed";
        case InstructionKind::refine: return "refinement failed";
        case InstructionKind::update: return "update failed";
        case InstructionKind::bootstrap: return "bootstrap failed";
    }
    return "phase failed";
}

// Calls the LLM until it yields N prompts, up to retry_limit retries. A final
// short answer is cycled up to N; a final unparseable answer fails the phase.
inline std::vector<std::string> run_llm_phase(InstructionKind kind, const std::string& instruction,
                                              LlmGateway& llm, const PhaseContext& ctx) {
    for (std::uint32_t attempt = 0; attempt <= ctx.retry_limit; ++attempt) {
        std::string raw = llm.complete(instruction);
        auto parsed = parse_llm_response(raw, ctx.N);
        const bool last = attempt == ctx.retry_limit;
        const bool pad = last && parsed.parse_status == ParseStatus::count_mismatch;
        if (ctx.ledger) {
            ctx.ledger->append(LlmExchange{ctx.step_index, kind, attempt, instruction, std::move(raw),
                                           parsed.parse_status, pad});
        }
        if (parsed.parse_status == ParseStatus::ok) return std::move(parsed.prompts);
        if (pad) {
            auto prompts = parsed.prompts;
            for (std::size_t i = 0; prompts.size() < ctx.N; ++i) prompts.push_back(parsed.prompts[i % parsed.prompts.size()]);
            return prompts;
        }
    }
    throw PhaseFailed(std::string(phase_failure(kind)));
}

inline std::vector<Prompt> as_prompts(const std::vector<std::string>& texts, PromptOrigin origin,
                                      std::uint64_t step) {
    std::vector<Prompt> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.emplace_back(t, origin, static_cast<std::uint32_t>(step));
    return out;
}

inline void require_kind(const InstructionTemplate& t, InstructionKind kind) {
    if (t.kind() != kind) {
        throw ConfigError("expected a " + std::string(to_string(kind)) + " template, got " +
                          std::string(to_string(t.kind())));
    }
}

}  // namespace detail

inline AgentState expand(const Prompt& initial, const InstructionTemplate& tmpl, LlmGateway& llm,
                         const PhaseContext& ctx) {
    detail::require_kind(tmpl, InstructionKind::expand);
    const auto instruction = tmpl.render({{"N", std::to_string(ctx.N)}, {"initial_prompt", initial.text()}});
    auto texts = detail::run_llm_phase(InstructionKind::expand, instruction, llm, ctx);
    return AgentState(ctx.step_index, StateParity::post_expansion_or_update,
                      detail::as_prompts(texts, PromptOrigin::expanded, ctx.step_index));
}

/// Produces the refined prompt set. The returned state carries an empty score
/// list; scoring fills it before the state enters the ledger.
inline AgentState refine(const AgentState& state, const InstructionTemplate& tmpl, LlmGateway& llm,
                         const PhaseContext& ctx) {
    detail::require_kind(tmpl, InstructionKind::refine);
    if (state.parity != StateParity::post_expansion_or_update) {
        throw ValidationError("refine expects a post_expansion_or_update state");
    }
    const auto instruction =
        tmpl.render({{"N", std::to_string(ctx.N)}, {"prompt_list", render_prompt_list(state.prompts)}});
    auto texts = detail::run_llm_phase(InstructionKind::refine, instruction, llm, ctx);
    return AgentState(ctx.step_index, StateParity::post_refinement,
                      detail::as_prompts(texts, PromptOrigin::refined, ctx.step_index),
                      std::vector<ScoredPrompt>{});
}

inline AgentState update(const AgentState& state, const InstructionTemplate& tmpl, LlmGateway& llm,
                         const ContrastBlock& contrast, const PhaseContext& ctx) {
    detail::require_kind(tmpl, InstructionKind::update);
    if (state.parity != StateParity::post_refinement) {
        throw ValidationError("update expects a post_refinement state");
    }
    const auto instruction =
        tmpl.render({{"N", std::to_string(ctx.N)}, {"contrast_block", contrast.rendered}});
    auto texts = detail::run_llm_phase(InstructionKind::update, instruction, llm, ctx);
    return AgentState(ctx.step_index, StateParity::post_expansion_or_update,
                      detail::as_prompts(texts, PromptOrigin::updated, ctx.step_index));
}

/// Highest motion_sim among prompts with text_sim < eta. Ties go to the
/// earlier round, then to the lexicographically smaller text.
inline ScoredPrompt select_best(const std::vector<ScoredPrompt>& pool, double eta) {
    if (pool.empty()) throw ValidationError("select_best needs a non-empty pool");
    const ScoredPrompt* best = nullptr;
    for (const auto& c : pool) {
        if (!(c.text_sim < eta)) continue;
        if (!best || c.motion_sim > best->motion_sim ||
            (c.motion_sim == best->motion_sim &&
             (c.prompt.round_index() < best->prompt.round_index() ||
              (c.prompt.round_index() == best->prompt.round_index() && c.prompt.text() < best->prompt.text())))) {
            best = &c;
        }
    }
    if (!best) throw NoFeasiblePrompt();
    return *best;
}

inline void require_bound(const AttackGateways& gw) {
    if (!gw.victim) throw GatewayError("victim", "unbound");
    if (!gw.motion_encoder) throw GatewayError("motion_encoder", "unbound");
    if (!gw.text_encoder) throw GatewayError("text_encoder", "unbound");
    if (!gw.llm) throw GatewayError("llm", "unbound");
}

/// Number of refine+score rounds for K half-iterations.
inline std::uint32_t refinement_rounds(std::uint32_t K) { return K / 2 + 1; }

namespace detail {

// Scores a refined state, records the outcome and reports budget exhaustion.
inline bool score_into_ledger(AgentState& refined, AttackRunRecord& record, const Prompt& target_prompt,
                              const MotionClip& target_motion, const AttackGateways& gw,
                              std::map<std::string, MotionClip>& clips) {
    const auto& cfg = record.config();
    ScoringContext sctx;
    sctx.run_seed = cfg.run_seed;
    sctx.step_index = refined.step_index;
    sctx.victim_samples = cfg.victim_samples;
    sctx.parallelism = cfg.parallelism;
    if (cfg.max_victim_queries) {
        sctx.budget_remaining = *cfg.max_victim_queries - std::min<std::uint64_t>(*cfg.max_victim_queries, record.victim_queries());
    }
    auto outcome = score_prompt_set(refined.prompts, target_motion, target_prompt, gw, sctx, false);
    for (auto& q : outcome.queries) record.append(std::move(q));
    for (auto& f : outcome.failures) record.append(std::move(f));
    clips.merge(outcome.clips);
    refined.scores = std::move(outcome.scores);
    const bool empty = refined.scores->empty();
    record.append(refined);
    if (empty && !outcome.budget_exhausted) throw NoScorablePrompts();
    return outcome.budget_exhausted;
}

}  // namespace detail

/// Runs one full attack: initial prompt, one expansion, then K half-iterations
/// alternating refine+score and update. When K ends on an update, one more
/// refine+score round scores the updated prompts. The best feasible prompt
/// over every scored set is selected at the end.
inline AttackRunRecord run_attack(const Prompt& target_prompt, const MotionClip& target_motion,
                                  const AttackConfig& config, const TemplateSet& templates,
                                  const AttackGateways& gw) {
    validate_config(config);
    require_bound(gw);
    AttackRunRecord record(config, target_prompt, target_motion, RunMethod::agent, templates.versions());
    record.set_created_at(utc_timestamp());

    PhaseContext ctx{config.N, config.llm_retry_limit, 0, &record};

    std::optional<Prompt> initial;
    if (config.initial_prompt) {
        initial.emplace(Prompt::initial(*config.initial_prompt));
    } else if (config.bootstrap_initial) {
        PhaseContext boot = ctx;
        boot.N = 1;
        const auto texts = detail::run_llm_phase(InstructionKind::bootstrap, templates.bootstrap.render({}), *gw.llm, boot);
        initial.emplace(Prompt::initial(texts.front()));
    } else {
        throw ConfigError("no initial prompt: set initial_prompt or bootstrap_initial");
    }
    record.append(AgentState(0, StateParity::pre_expansion, {*initial}));

    ctx.step_index = 1;
    AgentState current = expand(*initial, templates.expand, *gw.llm, ctx);
    record.append(current);

    std::map<std::string, MotionClip> clips;
    bool exhausted = false;
    const std::uint32_t half_iterations = config.K + (config.K % 2 == 0 ? 1 : 0);
    for (std::uint32_t k = 1; k <= half_iterations && !exhausted; ++k) {
        ctx.step_index = record.states().size();
        if (k % 2 == 1) {
            AgentState refined = refine(current, templates.refine, *gw.llm, ctx);
            exhausted = detail::score_into_ledger(refined, record, target_prompt, target_motion, gw, clips);
            current = record.states().back();
        } else {
            const auto contrast = render_contrast_block(*current.scores, config.score_decimals);
            current = update(current, templates.update, *gw.llm, contrast, ctx);
            record.append(current);
        }
    }

    const auto pool = record.scored_pool();
    std::optional<ScoredPrompt> best;
    RunStatus status = exhausted ? RunStatus::budget_exhausted : RunStatus::completed;
    if (!pool.empty()) {
        try {
            best = select_best(pool, config.eta);
        } catch (const NoFeasiblePrompt&) {
            if (!exhausted) status = RunStatus::no_feasible_prompt;
        }
    } else if (!exhausted) {
        status = RunStatus::no_feasible_prompt;
    }
    std::optional<MotionClip> best_motion;
    if (best) best_motion = clips.at(best->motion_ref).with_source(best->prompt.id());
    record.finish(status, std::move(best), std::move(best_motion));
    return record;
}

}  // namespace prompt_siege
