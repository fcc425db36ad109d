#pragma once

#include <chrono>
#include <ctime>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "prompt_siege/core/record.hpp"

namespace prompt_siege {

using json = nlohmann::ordered_json;

// JSON views of the domain types. Readers go through the validating
// constructors, so a malformed document surfaces as ValidationError.

inline json to_json_value(const Prompt& p) {
    return {{"id", p.id()},
            {"text", p.text()},
            {"origin", to_string(p.origin())},
            {"round_index", p.round_index()}};
}

inline Prompt prompt_from_json(const json& j) {
    Prompt p(j.at("text").get<std::string>(),
             prompt_origin_from_string(j.at("origin").get<std::string>()),
             j.at("round_index").get<std::uint32_t>());
    if (j.contains("id") && j.at("id").get<std::string>() != p.id()) {
        throw ValidationError("prompt id does not match its content");
    }
    return p;
}

inline json to_json_value(const MotionClip& c) {
    json j = {{"id", c.id()},
              {"T", c.frame_count()},
              {"J", c.joint_count()},
              {"fps", c.fps()},
              {"layout", "TJ3-row-major"}};
    j["data"] = std::vector<double>(c.data().begin(), c.data().end());
    if (c.source_prompt_id()) j["source_prompt_id"] = *c.source_prompt_id();
    return j;
}

inline MotionClip motion_clip_from_json(const json& j) {
    if (j.value("layout", std::string("TJ3-row-major")) != "TJ3-row-major") {
        throw ValidationError("unsupported motion layout");
    }
    std::optional<std::string> src;
    if (j.contains("source_prompt_id")) src = j.at("source_prompt_id").get<std::string>();
    MotionClip c(j.at("T").get<std::size_t>(), j.at("J").get<std::size_t>(),
                 j.at("fps").get<double>(), j.at("data").get<std::vector<double>>(), std::move(src));
    if (j.contains("id") && j.at("id").get<std::string>() != c.id()) {
        throw ValidationError("motion clip id does not match its content");
    }
    return c;
}

inline json to_json_value(const FeatureVector& f) {
    return {{"space", to_string(f.space())},
            {"values", std::vector<double>(f.values().begin(), f.values().end())}};
}

inline FeatureVector feature_vector_from_json(const json& j) {
    return FeatureVector(j.at("values").get<std::vector<double>>(),
                         feature_space_from_string(j.at("space").get<std::string>()));
}

inline json to_json_value(const AttackConfig& c) {
    json j = {{"K", c.K},
              {"N", c.N},
              {"eta", c.eta},
              {"run_seed", c.run_seed},
              {"llm_retry_limit", c.llm_retry_limit},
              {"score_decimals", c.score_decimals},
              {"max_victim_queries", nullptr},
              {"parallelism", c.parallelism},
              {"victim_samples", c.victim_samples},
              {"initial_prompt", nullptr},
              {"bootstrap_initial", c.bootstrap_initial}};
    if (c.max_victim_queries) j["max_victim_queries"] = *c.max_victim_queries;
    if (c.initial_prompt) j["initial_prompt"] = *c.initial_prompt;
    return j;
}

// Missing keys keep their defaults; unknown keys are rejected.
inline AttackConfig attack_config_from_json(const json& j) {
    static const std::vector<std::string> known = {
        "K", "N", "eta", "run_seed", "llm_retry_limit", "score_decimals", "max_victim_queries",
        "parallelism", "victim_samples", "initial_prompt", "bootstrap_initial"};
    if (!j.is_object()) throw ConfigError("config must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    AttackConfig c;
    try {
        if (j.contains("K")) c.K = j["K"].get<std::uint32_t>();
        if (j.contains("N")) c.N = j["N"].get<std::uint32_t>();
        if (j.contains("eta")) c.eta = j["eta"].get<double>();
        if (j.contains("run_seed")) c.run_seed = j["run_seed"].get<std::uint64_t>();
        if (j.contains("llm_retry_limit")) c.llm_retry_limit = j["llm_retry_limit"].get<std::uint32_t>();
        if (j.contains("score_decimals")) c.score_decimals = j["score_decimals"].get<std::uint32_t>();
        if (j.contains("max_victim_queries") && !j["max_victim_queries"].is_null()) {
            c.max_victim_queries = j["max_victim_queries"].get<std::uint64_t>();
        }
        if (j.contains("parallelism")) c.parallelism = j["parallelism"].get<std::uint32_t>();
        if (j.contains("victim_samples")) c.victim_samples = j["victim_samples"].get<std::uint32_t>();
        if (j.contains("initial_prompt") && !j["initial_prompt"].is_null()) {
            c.initial_prompt = j["initial_prompt"].get<std::string>();
        }
        if (j.contains("bootstrap_initial")) c.bootstrap_initial = j["bootstrap_initial"].get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

inline json to_json_value(const ScoredPrompt& s) {
    return {{"prompt", to_json_value(s.prompt)},
            {"motion_sim", s.motion_sim},
            {"text_sim", s.text_sim},
            {"motion_ref", s.motion_ref}};
}

inline ScoredPrompt scored_prompt_from_json(const json& j) {
    return ScoredPrompt(prompt_from_json(j.at("prompt")), j.at("motion_sim").get<double>(),
                        j.at("text_sim").get<double>(), j.at("motion_ref").get<std::string>());
}

inline json to_json_value(const AgentState& s) {
    json prompts = json::array();
    for (const auto& p : s.prompts) prompts.push_back(to_json_value(p));
    json j = {{"step_index", s.step_index}, {"parity", to_string(s.parity)}, {"prompts", prompts}};
    if (s.scores) {
        json scores = json::array();
        for (const auto& sp : *s.scores) scores.push_back(to_json_value(sp));
        j["scores"] = scores;
    }
    return j;
}

inline AgentState agent_state_from_json(const json& j) {
    std::vector<Prompt> prompts;
    for (const auto& p : j.at("prompts")) prompts.push_back(prompt_from_json(p));
    std::optional<std::vector<ScoredPrompt>> scores;
    if (j.contains("scores")) {
        scores.emplace();
        for (const auto& s : j.at("scores")) scores->push_back(scored_prompt_from_json(s));
    }
    return AgentState(j.at("step_index").get<std::uint64_t>(),
                      state_parity_from_string(j.at("parity").get<std::string>()),
                      std::move(prompts), std::move(scores));
}

inline json to_json_value(const LlmExchange& e) {
    return {{"step_index", e.step_index},      {"instruction", to_string(e.kind)},
            {"attempt", e.attempt},            {"input", e.input},
            {"output", e.output},              {"parse_status", to_string(e.parse_status)},
            {"padded", e.padded}};
}

inline LlmExchange llm_exchange_from_json(const json& j) {
    LlmExchange e;
    e.step_index = j.at("step_index").get<std::uint64_t>();
    e.kind = instruction_kind_from_string(j.at("instruction").get<std::string>());
    e.attempt = j.at("attempt").get<std::uint32_t>();
    e.input = j.at("input").get<std::string>();
    e.output = j.at("output").get<std::string>();
    e.parse_status = parse_status_from_string(j.at("parse_status").get<std::string>());
    e.padded = j.at("padded").get<bool>();
    return e;
}

inline json to_json_value(const VictimQuery& q) {
    return {{"step_index", q.step_index}, {"prompt_id", q.prompt_id}, {"text", q.text},
            {"seed", q.seed},             {"ok", q.ok},               {"clip_id", q.clip_id},
            {"error", q.error}};
}

inline VictimQuery victim_query_from_json(const json& j) {
    VictimQuery q;
    q.step_index = j.at("step_index").get<std::uint64_t>();
    q.prompt_id = j.at("prompt_id").get<std::string>();
    q.text = j.at("text").get<std::string>();
    q.seed = j.at("seed").get<std::uint64_t>();
    q.ok = j.at("ok").get<bool>();
    q.clip_id = j.at("clip_id").get<std::string>();
    q.error = j.at("error").get<std::string>();
    return q;
}

inline json to_json_value(const ScoreFailure& f) {
    return {{"step_index", f.step_index}, {"prompt_id", f.prompt_id}, {"text", f.text}, {"reason", f.reason}};
}

inline ScoreFailure score_failure_from_json(const json& j) {
    ScoreFailure f;
    f.step_index = j.at("step_index").get<std::uint64_t>();
    f.prompt_id = j.at("prompt_id").get<std::string>();
    f.text = j.at("text").get<std::string>();
    f.reason = j.at("reason").get<std::string>();
    return f;
}

// ---------------------------------------------------------------------------
// Line-delimited ledger container
// ---------------------------------------------------------------------------

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct LedgerWriteOptions {
    // Drops wall-clock fields so identical runs serialize byte-identically.
    bool normalize_timestamps = false;
};

inline void write_ledger(std::ostream& out, const AttackRunRecord& r, LedgerWriteOptions opts = {}) {
    json header = {{"format", kFormatVersion},
                   {"kind", "header"},
                   {"method", to_string(r.method())},
                   {"config", to_json_value(r.config())},
                   {"templates", r.template_versions()},
                   {"target_prompt", to_json_value(r.target_prompt())},
                   {"target_motion", to_json_value(r.target_motion())}};
    if (!opts.normalize_timestamps) {
        header["created_at"] = r.created_at().empty() ? utc_timestamp() : r.created_at();
    }
    out << header.dump() << '\n';
    for (const auto& ev : r.order()) {
        json line;
        switch (ev.kind) {
            case EventKind::state:
                line = {{"kind", "state"}, {"state", to_json_value(r.states()[ev.index])}};
                break;
            case EventKind::exchange:
                line = {{"kind", "exchange"}, {"exchange", to_json_value(r.llm_exchanges()[ev.index])}};
                break;
            case EventKind::query:
                line = {{"kind", "query"}, {"query", to_json_value(r.queries()[ev.index])}};
                break;
            case EventKind::failure:
                line = {{"kind", "failure"}, {"failure", to_json_value(r.failures()[ev.index])}};
                break;
        }
        out << line.dump() << '\n';
    }
    json result = {{"kind", "result"},
                   {"status", to_string(r.status())},
                   {"victim_queries", r.victim_queries()},
                   {"llm_calls", r.llm_calls()},
                   {"best", nullptr},
                   {"best_motion", nullptr}};
    if (r.best()) result["best"] = to_json_value(*r.best());
    if (r.best_motion()) result["best_motion"] = to_json_value(*r.best_motion());
    out << result.dump() << '\n';
}

inline std::string ledger_to_string(const AttackRunRecord& r, LedgerWriteOptions opts = {}) {
    std::ostringstream os;
    write_ledger(os, r, opts);
    return os.str();
}

// Reads only the header's format tag; used to detect mixed-version inputs.
inline std::string peek_ledger_version(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw LedgerError("empty ledger");
    try {
        return json::parse(line).at("format").get<std::string>();
    } catch (const json::exception& e) {
        throw LedgerError(std::string("malformed ledger header: ") + e.what());
    }
}

inline AttackRunRecord read_ledger(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() -> std::optional<json> {
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            try {
                return json::parse(line);
            } catch (const json::exception& e) {
                throw LedgerError("ledger line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        return std::nullopt;
    };
    auto header = next();
    if (!header) throw LedgerError("empty ledger");
    try {
        const auto version = header->at("format").get<std::string>();
        if (version != kFormatVersion) {
            throw LedgerError("unsupported ledger version '" + version + "' (expected '" +
                              std::string(kFormatVersion) + "')");
        }
        AttackRunRecord record(attack_config_from_json(header->at("config")),
                               prompt_from_json(header->at("target_prompt")),
                               motion_clip_from_json(header->at("target_motion")),
                               run_method_from_string(header->at("method").get<std::string>()),
                               header->at("templates").get<std::map<std::string, std::string>>());
        if (header->contains("created_at")) {
            record.set_created_at(header->at("created_at").get<std::string>());
        }
        while (auto j = next()) {
            const auto kind = j->at("kind").get<std::string>();
            if (kind == "state") {
                record.append(agent_state_from_json(j->at("state")));
            } else if (kind == "exchange") {
                record.append(llm_exchange_from_json(j->at("exchange")));
            } else if (kind == "query") {
                record.append(victim_query_from_json(j->at("query")));
            } else if (kind == "failure") {
                record.append(score_failure_from_json(j->at("failure")));
            } else if (kind == "result") {
                const auto status = run_status_from_string(j->at("status").get<std::string>());
                std::optional<ScoredPrompt> best;
                std::optional<MotionClip> best_motion;
                if (!j->at("best").is_null()) best = scored_prompt_from_json(j->at("best"));
                if (!j->at("best_motion").is_null()) best_motion = motion_clip_from_json(j->at("best_motion"));
                if (j->at("victim_queries").get<std::size_t>() != record.victim_queries() ||
                    j->at("llm_calls").get<std::size_t>() != record.llm_calls()) {
                    throw LedgerError("ledger counters do not match recorded events");
                }
                if (status != RunStatus::running) record.finish(status, std::move(best), std::move(best_motion));
                if (next()) throw LedgerError("ledger has content after the result line");
                return record;
            } else {
                throw LedgerError("unknown ledger line kind '" + kind + "'");
            }
        }
        throw LedgerError("ledger is missing its result line");
    } catch (const json::exception& e) {
        throw LedgerError("ledger line " + std::to_string(lineno) + ": " + e.what());
    }
}

}  // namespace prompt_siege
