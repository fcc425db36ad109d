#pragma once

#include <thread>

#include "prompt_siege/core/record.hpp"
#include "prompt_siege/mmic/similarity.hpp"

namespace prompt_siege {

struct ScoringContext {
    std::uint64_t run_seed = 0;
    std::uint64_t step_index = 0;
    std::uint32_t victim_samples = 1;
    std::uint32_t parallelism = 1;
    // Victim cache misses still allowed; nullopt means unlimited.
    std::optional<std::uint64_t> budget_remaining;
};

struct ScoringOutcome {
    std::vector<ScoredPrompt> scores;     // input order, failures excluded
    std::vector<VictimQuery> queries;     // one per victim invocation, input order
    std::vector<ScoreFailure> failures;
    std::map<std::string, MotionClip> clips;  // first-sample clip of each scored prompt, by id
    std::size_t unscored = 0;             // prompts dropped by budget exhaustion
    bool budget_exhausted = false;
};

/// Seed of the j-th victim sample for a prompt; sample 0 is seed_for itself.
inline std::uint64_t sample_seed(std::uint64_t run_seed, std::string_view text, std::uint32_t sample) {
    return seed_for(run_seed + sample, text);
}

/// Queries the victim for every prompt and scores it against the target.
///
/// Budget is reserved in input order before any query runs, so the set of
/// scored prompts never depends on thread scheduling. Once a prompt cannot
/// be afforded, it and everything after it stay unscored.
inline ScoringOutcome score_prompt_set(const std::vector<Prompt>& prompts, const MotionClip& target_motion,
                                       const Prompt& target_prompt, const AttackGateways& gw,
                                       const ScoringContext& ctx, bool require_some = true) {
    if (prompts.empty()) throw ValidationError("score_prompt_set needs at least one prompt");
    const std::uint32_t samples = std::max<std::uint32_t>(1, ctx.victim_samples);

    struct Slot {
        std::string text;
        std::uint64_t seed;
        std::ptrdiff_t job = -1;  // index into jobs; -1 means served from cache
    };
    struct Job {
        std::string text;
        std::uint64_t seed;
        std::string prompt_id;
        std::optional<MotionClip> clip;
        std::string error;
    };

    std::vector<std::vector<Slot>> slots;
    std::vector<Job> jobs;
    std::map<std::pair<std::string, std::uint64_t>, std::size_t> planned;
    std::optional<std::uint64_t> budget = ctx.budget_remaining;
    ScoringOutcome out;

    std::size_t affordable = 0;
    for (; affordable < prompts.size(); ++affordable) {
        const auto& p = prompts[affordable];
        std::vector<Slot> mine;
        std::vector<Job> fresh;
        std::map<std::pair<std::string, std::uint64_t>, std::size_t> fresh_planned;
        for (std::uint32_t s = 0; s < samples; ++s) {
            Slot slot{p.text(), sample_seed(ctx.run_seed, p.text(), s)};
            const auto key = std::make_pair(slot.text, slot.seed);
            if (gw.victim->is_cached(slot.text, slot.seed)) {
                // served from cache
            } else if (auto it = planned.find(key); it != planned.end() && gw.victim->cache_enabled()) {
                slot.job = static_cast<std::ptrdiff_t>(it->second);
            } else if (auto it2 = fresh_planned.find(key); it2 != fresh_planned.end() && gw.victim->cache_enabled()) {
                slot.job = static_cast<std::ptrdiff_t>(jobs.size() + it2->second);
            } else {
                slot.job = static_cast<std::ptrdiff_t>(jobs.size() + fresh.size());
                fresh_planned[key] = fresh.size();
                fresh.push_back(Job{slot.text, slot.seed, p.id(), std::nullopt, {}});
            }
            mine.push_back(std::move(slot));
        }
        if (budget && fresh.size() > *budget) {
            out.budget_exhausted = true;
            break;
        }
        if (budget) *budget -= fresh.size();
        for (auto& [key, idx] : fresh_planned) planned[key] = jobs.size() + idx;
        for (auto& j : fresh) jobs.push_back(std::move(j));
        slots.push_back(std::move(mine));
    }
    out.unscored = prompts.size() - affordable;

    // Run the planned misses; results land by job index.
    {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
                try {
                    jobs[i].clip.emplace(gw.victim->query(jobs[i].text, jobs[i].seed).clip);
                } catch (const Error& e) {
                    jobs[i].error = e.what();
                }
            }
        };
        const std::size_t workers = std::min<std::size_t>(ctx.parallelism, jobs.size());
        if (workers <= 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        }
    }
    for (const auto& j : jobs) {
        VictimQuery q;
        q.step_index = ctx.step_index;
        q.prompt_id = j.prompt_id;
        q.text = j.text;
        q.seed = j.seed;
        q.ok = j.clip.has_value();
        q.clip_id = j.clip ? j.clip->id() : std::string();
        q.error = j.error;
        out.queries.push_back(std::move(q));
    }

    const auto target_features = gw.motion_encoder->encode(target_motion);
    const auto target_text = gw.text_encoder->encode(target_prompt.text());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& p = prompts[i];
        try {
            double motion_sum = 0;
            std::string ref;
            for (const auto& slot : slots[i]) {
                MotionClip clip = [&] {
                    if (slot.job < 0) return gw.victim->query(slot.text, slot.seed).clip;
                    const auto& job = jobs[static_cast<std::size_t>(slot.job)];
                    if (!job.clip) throw QueryFailure("victim", job.error);
                    return *job.clip;
                }();
                if (ref.empty()) {
                    ref = clip.id();
                    out.clips.try_emplace(ref, clip);
                }
                motion_sum += cosine(gw.motion_encoder->encode(clip), target_features);
            }
            const double text_sim = cosine(gw.text_encoder->encode(p.text()), target_text);
            out.scores.emplace_back(p, motion_sum / static_cast<double>(slots[i].size()), text_sim, ref);
        } catch (const Error& e) {
            out.failures.push_back({ctx.step_index, p.id(), p.text(), e.what()});
        }
    }
    if (require_some && out.scores.empty() && !out.budget_exhausted) throw NoScorablePrompts();
    return out;
}

}  // namespace prompt_siege
