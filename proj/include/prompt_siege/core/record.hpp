#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "prompt_siege/core/types.hpp"

namespace prompt_siege {

inline constexpr std::string_view kFormatVersion = "prompt-siege/1";

enum class InstructionKind { bootstrap, expand, refine, update };

inline std::string_view to_string(InstructionKind k) {
    switch (k) {
        case InstructionKind::bootstrap: return "bootstrap";
        case InstructionKind::expand: return "expand";
        case InstructionKind::refine: return "refine";
        case InstructionKind::update: return "update";
    }
    return "?";
}

inline InstructionKind instruction_kind_from_string(std::string_view s) {
    for (auto v : {InstructionKind::bootstrap, InstructionKind::expand, InstructionKind::refine,
                   InstructionKind::update}) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("unknown instruction kind '" + std::string(s) + "'");
}

enum class ParseStatus { ok, count_mismatch, unparseable };

inline std::string_view to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::ok: return "ok";
        case ParseStatus::count_mismatch: return "count_mismatch";
        case ParseStatus::unparseable: return "unparseable";
    }
    return "?";
}

inline ParseStatus parse_status_from_string(std::string_view s) {
    for (auto v : {ParseStatus::ok, ParseStatus::count_mismatch, ParseStatus::unparseable}) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("unknown parse status '" + std::string(s) + "'");
}

enum class RunStatus { running, completed, budget_exhausted, no_feasible_prompt };

inline std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::running: return "running";
        case RunStatus::completed: return "completed";
        case RunStatus::budget_exhausted: return "budget_exhausted";
        case RunStatus::no_feasible_prompt: return "no_feasible_prompt";
    }
    return "?";
}

inline RunStatus run_status_from_string(std::string_view s) {
    for (auto v : {RunStatus::running, RunStatus::completed, RunStatus::budget_exhausted,
                   RunStatus::no_feasible_prompt}) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("unknown run status '" + std::string(s) + "'");
}

enum class RunMethod { agent, baseline };

inline std::string_view to_string(RunMethod m) {
    return m == RunMethod::agent ? "agent" : "baseline";
}

inline RunMethod run_method_from_string(std::string_view s) {
    if (s == "agent") return RunMethod::agent;
    if (s == "baseline") return RunMethod::baseline;
    throw ValidationError("unknown run method '" + std::string(s) + "'");
}

struct LlmExchange {
    std::uint64_t step_index = 0;
    InstructionKind kind = InstructionKind::expand;
    std::uint32_t attempt = 0;
    std::string input;
    std::string output;
    ParseStatus parse_status = ParseStatus::ok;
    // Set when a short response was cycled up to N prompts.
    bool padded = false;

    bool operator==(const LlmExchange&) const = default;
};

struct VictimQuery {
    std::uint64_t step_index = 0;
    std::string prompt_id;
    std::string text;
    std::uint64_t seed = 0;
    bool ok = true;
    std::string clip_id;  // empty when the query failed
    std::string error;

    bool operator==(const VictimQuery&) const = default;
};

// A prompt that could not be scored (victim failure, degenerate embedding).
struct ScoreFailure {
    std::uint64_t step_index = 0;
    std::string prompt_id;
    std::string text;
    std::string reason;

    bool operator==(const ScoreFailure&) const = default;
};

using LedgerEvent = std::variant<AgentState, LlmExchange, VictimQuery, ScoreFailure>;

enum class EventKind { state, exchange, query, failure };

struct EventRef {
    EventKind kind;
    std::size_t index;
    bool operator==(const EventRef&) const = default;
};

/// Append-only audit trail of one attack (or baseline) run.
///
/// States must arrive with consecutive step indices starting at 0. Exchanges
/// and queries belong to the step currently being produced, i.e. their
/// step_index equals the number of states already appended.
class AttackRunRecord {
public:
    AttackRunRecord(AttackConfig config, Prompt target_prompt, MotionClip target_motion,
                    RunMethod method = RunMethod::agent,
                    std::map<std::string, std::string> template_versions = {})
        : config_(std::move(config)),
          target_prompt_(std::move(target_prompt)),
          target_motion_(std::move(target_motion)),
          method_(method),
          template_versions_(std::move(template_versions)) {}

    void append(AgentState state) {
        require_open();
        if (state.step_index != states_.size()) {
            throw LedgerError("out-of-order state: expected step " + std::to_string(states_.size()) +
                              ", got " + std::to_string(state.step_index));
        }
        order_.push_back({EventKind::state, states_.size()});
        states_.push_back(std::move(state));
    }

    void append(LlmExchange exchange) {
        require_open();
        check_event_step(exchange.step_index);
        order_.push_back({EventKind::exchange, exchanges_.size()});
        exchanges_.push_back(std::move(exchange));
    }

    void append(VictimQuery query) {
        require_open();
        check_event_step(query.step_index);
        order_.push_back({EventKind::query, queries_.size()});
        queries_.push_back(std::move(query));
    }

    void append(ScoreFailure failure) {
        require_open();
        check_event_step(failure.step_index);
        order_.push_back({EventKind::failure, failures_.size()});
        failures_.push_back(std::move(failure));
    }

    void append(LedgerEvent event) {
        std::visit([this](auto&& e) { append(std::move(e)); }, std::move(event));
    }

    void finish(RunStatus status, std::optional<ScoredPrompt> best,
                std::optional<MotionClip> best_motion = std::nullopt) {
        require_open();
        if (status == RunStatus::running) throw LedgerError("cannot finish a run as running");
        if (best && !(best->text_sim < config_.eta)) {
            throw LedgerError("best prompt violates the text-similarity constraint");
        }
        if (status == RunStatus::completed && !best) {
            throw LedgerError("completed run must carry a best prompt");
        }
        status_ = status;
        best_ = std::move(best);
        best_motion_ = std::move(best_motion);
    }

    const AttackConfig& config() const noexcept { return config_; }
    const Prompt& target_prompt() const noexcept { return target_prompt_; }
    const MotionClip& target_motion() const noexcept { return target_motion_; }
    RunMethod method() const noexcept { return method_; }
    const std::map<std::string, std::string>& template_versions() const noexcept {
        return template_versions_;
    }
    const std::vector<AgentState>& states() const noexcept { return states_; }
    const std::vector<LlmExchange>& llm_exchanges() const noexcept { return exchanges_; }
    const std::vector<VictimQuery>& queries() const noexcept { return queries_; }
    const std::vector<ScoreFailure>& failures() const noexcept { return failures_; }
    const std::vector<EventRef>& order() const noexcept { return order_; }
    std::size_t victim_queries() const noexcept { return queries_.size(); }
    std::size_t llm_calls() const noexcept { return exchanges_.size(); }
    const std::optional<ScoredPrompt>& best() const noexcept { return best_; }
    const std::optional<MotionClip>& best_motion() const noexcept { return best_motion_; }
    RunStatus status() const noexcept { return status_; }

    const std::string& created_at() const noexcept { return created_at_; }
    void set_created_at(std::string ts) { created_at_ = std::move(ts); }

    // Every scored prompt across all post_refinement states, in ledger order.
    std::vector<ScoredPrompt> scored_pool() const {
        std::vector<ScoredPrompt> pool;
        for (const auto& s : states_) {
            if (s.scores) pool.insert(pool.end(), s.scores->begin(), s.scores->end());
        }
        return pool;
    }

    bool operator==(const AttackRunRecord&) const = default;

private:
    void require_open() const {
        if (status_ != RunStatus::running) throw LedgerError("record is already finished");
    }
    void check_event_step(std::uint64_t step) const {
        if (step != states_.size()) {
            throw LedgerError("out-of-order event: expected step " + std::to_string(states_.size()) +
                              ", got " + std::to_string(step));
        }
    }

    AttackConfig config_;
    Prompt target_prompt_;
    MotionClip target_motion_;
    RunMethod method_;
    std::map<std::string, std::string> template_versions_;
    std::vector<AgentState> states_;
    std::vector<LlmExchange> exchanges_;
    std::vector<VictimQuery> queries_;
    std::vector<ScoreFailure> failures_;
    std::vector<EventRef> order_;
    RunStatus status_ = RunStatus::running;
    std::optional<ScoredPrompt> best_;
    std::optional<MotionClip> best_motion_;
    std::string created_at_;
};

inline AttackRunRecord ledger_append(AttackRunRecord record, LedgerEvent event) {
    record.append(std::move(event));
    return record;
}

/// Per-round best scores derived from the post_refinement states.
struct RoundSummary {
    std::uint64_t step_index;
    double round_best;
    double best_so_far;
    std::optional<double> best_feasible_so_far;
};

inline std::vector<RoundSummary> round_curve(const AttackRunRecord& record) {
    std::vector<RoundSummary> curve;
    double best = -2.0;
    std::optional<double> feasible;
    for (const auto& s : record.states()) {
        if (!s.scores || s.scores->empty()) continue;
        double round_best = -2.0;
        for (const auto& sp : *s.scores) {
            round_best = std::max(round_best, sp.motion_sim);
            if (sp.text_sim < record.config().eta) {
                feasible = feasible ? std::max(*feasible, sp.motion_sim) : sp.motion_sim;
            }
        }
        best = std::max(best, round_best);
        curve.push_back({s.step_index, round_best, best, feasible});
    }
    return curve;
}

}  // namespace prompt_siege
