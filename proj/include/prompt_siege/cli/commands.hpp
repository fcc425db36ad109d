#pragma once

#include <iostream>

#include "prompt_siege/cli/manifest.hpp"

namespace prompt_siege::cli {

enum ExitCode : int {
    kExitCompleted = 0,
    kExitError = 1,
    kExitBudgetExhausted = 2,
    kExitNoFeasible = 3,
    kExitGateway = 4,
    kExitUsage = 64,
};

inline int exit_code_for(RunStatus s) {
    switch (s) {
        case RunStatus::completed: return kExitCompleted;
        case RunStatus::budget_exhausted: return kExitBudgetExhausted;
        case RunStatus::no_feasible_prompt: return kExitNoFeasible;
        case RunStatus::running: break;
    }
    return kExitError;
}

struct CommandOptions {
    fs::path manifest;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> budget;
    std::optional<fs::path> cache_dir;
    std::optional<fs::path> out;
    bool no_cache = false;
    bool normalize_timestamps = false;
    bool plot = false;
};

// ---------------------------------------------------------------------------
// Output bundle
// ---------------------------------------------------------------------------

inline void write_text(const fs::path& path, std::string_view content) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        out << content;
        if (!out) throw Error("cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

inline void write_status(const fs::path& dir, std::string_view command, std::string_view status, int code,
                         const std::string& message = {}) {
    json j{{"command", command}, {"status", status}, {"exit_code", code}};
    if (!message.empty()) j["message"] = message;
    try {
        write_text(dir / "status.json", j.dump(2) + "\n");
    } catch (const std::exception&) {
        // The exit code still reports the outcome.
    }
}

inline std::string curves_csv(const AttackRunRecord& r) {
    std::string out = "step_index,round_best,best_so_far,best_feasible_so_far\n";
    for (const auto& c : round_curve(r)) {
        out += std::to_string(c.step_index) + "," + format_fixed(c.round_best, 6) + "," + format_fixed(c.best_so_far, 6) + "," +
               (c.best_feasible_so_far ? format_fixed(*c.best_feasible_so_far, 6) : std::string()) + "\n";
    }
    return out;
}

/// Score-vs-round chart: best-so-far (solid) and per-round best (dashed).
inline std::string curves_svg(const AttackRunRecord& r) {
    const auto curve = round_curve(r);
    const double W = 640, H = 360, pad = 40;
    std::ostringstream s;
    s << R"(<svg xmlns="http://www.w3.org/2000/svg" width="640" height="360" viewBox="0 0 640 360">)" << '\n'
      << R"(<rect width="640" height="360" fill="white"/>)" << '\n';
    s << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\" font-size=\"12\">round (step index)</text>\n";
    s << "<text x=\"12\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << H / 2
      << ")\" text-anchor=\"middle\">motion similarity</text>\n";
    if (!curve.empty()) {
        const double x0 = static_cast<double>(curve.front().step_index);
        const double x1 = std::max(x0 + 1, static_cast<double>(curve.back().step_index));
        double lo = 1, hi = -1;
        for (const auto& c : curve) {
            lo = std::min(lo, c.round_best);
            hi = std::max(hi, c.best_so_far);
        }
        if (hi - lo < 1e-3) lo = hi - 0.1;
        auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (W - 2 * pad); };
        auto py = [&](double y) { return H - pad - (y - lo) / (hi - lo) * (H - 2 * pad); };
        auto poly = [&](auto value, const char* style) {
            s << "<polyline fill=\"none\" " << style << " points=\"";
            for (const auto& c : curve) s << px(static_cast<double>(c.step_index)) << "," << py(value(c)) << " ";
            s << "\"/>\n";
        };
        poly([](const RoundSummary& c) { return c.best_so_far; }, R"(stroke="#1f5fa8" stroke-width="2")");
        poly([](const RoundSummary& c) { return c.round_best; }, R"(stroke="#c0392b" stroke-dasharray="4 3")");
        s << "<text x=\"" << pad - 4 << "\" y=\"" << py(hi) << "\" text-anchor=\"end\" font-size=\"10\">"
          << format_fixed(hi, 3) << "</text>\n";
        s << "<text x=\"" << pad - 4 << "\" y=\"" << py(lo) << "\" text-anchor=\"end\" font-size=\"10\">"
          << format_fixed(lo, 3) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

inline json run_summary(const AttackRunRecord& r, const std::string& ledger_text) {
    json j{{"method", to_string(r.method())},
           {"status", to_string(r.status())},
           {"target_prompt", r.target_prompt().text()},
           {"victim_queries", r.victim_queries()},
           {"llm_calls", r.llm_calls()},
           {"states", r.states().size()},
           {"ledger_sha256", sha256_hex(ledger_text)},
           {"best", nullptr}};
    if (r.best()) {
        j["best"] = {{"text", r.best()->prompt.text()},
                     {"prompt_id", r.best()->prompt.id()},
                     {"round_index", r.best()->prompt.round_index()},
                     {"motion_sim", r.best()->motion_sim},
                     {"text_sim", r.best()->text_sim}};
    }
    return j;
}

inline void write_run_bundle(const fs::path& dir, const RunManifest& m, const AttackRunRecord& r,
                             const CommandOptions& opts) {
    fs::create_directories(dir);
    json manifest = m.source;
    manifest["config"] = to_json_value(m.config);
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    const std::string ledger = ledger_to_string(r, {opts.normalize_timestamps});
    write_text(dir / "ledger.jsonl", ledger);
    write_text(dir / "summary.json", run_summary(r, ledger).dump(2) + "\n");
    write_text(dir / "curves.csv", curves_csv(r));
    if (opts.plot) write_text(dir / "curves.svg", curves_svg(r));
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace detail {

template <class Body>
int guarded(std::string_view command, const fs::path& fallback_dir, std::ostream& err, Body&& body) {
    fs::path dir = fallback_dir;
    try {
        return body(dir);
    } catch (const GatewayError& e) {
        err << "error: " << e.what() << '\n';
        write_status(dir, command, "error", kExitGateway, e.what());
        return kExitGateway;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        write_status(dir, command, "error", kExitUsage, e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        write_status(dir, command, "error", kExitError, e.what());
        return kExitError;
    }
}

inline RunManifest prepare(const CommandOptions& opts, fs::path& dir) {
    RunManifest m = load_manifest(opts.manifest);
    dir = opts.out.value_or(m.output_dir);
    if (opts.seed) m.config.run_seed = *opts.seed;
    if (opts.budget) m.config.max_victim_queries = *opts.budget;
    if (opts.cache_dir) m.cache.dir = *opts.cache_dir;
    if (opts.no_cache) m.cache.enabled = false;
    m.output_dir = dir;
    validate_config(m.config);
    return m;
}

inline void require(const std::shared_ptr<void>& gw, std::string_view kind) {
    if (!gw) throw GatewayError(std::string(kind), "unbound");
}

inline int run_and_persist(std::string_view command, const CommandOptions& opts, std::ostream& out,
                           std::ostream& err, bool baseline) {
    return guarded(command, opts.out.value_or("out"), err, [&](fs::path& dir) {
        RunManifest m = prepare(opts, dir);
        const auto target = resolve_target(m);
        auto gw = build_gateways(m);
        require(gw.attack.victim, "victim");
        require(gw.attack.motion_encoder, "motion_encoder");
        require(gw.attack.text_encoder, "text_encoder");
        if (!baseline) require(gw.attack.llm, "llm");
        const AttackRunRecord record =
            baseline ? testbed::baseline_perturb_attack(target.prompt, target.motion, m.config, gw.attack)
                     : run_attack(target.prompt, target.motion, m.config, load_templates(m), gw.attack);
        write_run_bundle(dir, m, record, opts);
        const int code = exit_code_for(record.status());
        write_status(dir, command, to_string(record.status()), code);
        out << "status: " << to_string(record.status()) << '\n'
            << "victim queries: " << record.victim_queries() << ", llm calls: " << record.llm_calls() << '\n';
        if (record.best()) {
            out << "best: \"" << record.best()->prompt.text() << "\" motion_sim=" << format_fixed(record.best()->motion_sim, 4)
                << " text_sim=" << format_fixed(record.best()->text_sim, 4) << '\n';
        }
        out << "output: " << dir.string() << '\n';
        return code;
    });
}

}  // namespace detail

inline int cmd_attack(const CommandOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::run_and_persist("attack", opts, out, err, false);
}

inline int cmd_baseline(const CommandOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::run_and_persist("baseline", opts, out, err, true);
}

/// Reads ledgers, refusing inputs whose format versions differ.
inline std::vector<AttackRunRecord> read_ledgers(const std::vector<fs::path>& paths) {
    if (paths.empty()) throw ConfigError("no ledgers given");
    std::vector<std::pair<std::string, std::string>> versions;
    for (const auto& p : paths) {
        std::ifstream in(p);
        if (!in) throw Error("cannot open ledger " + p.string());
        versions.emplace_back(peek_ledger_version(in), p.string());
    }
    for (const auto& v : versions) {
        if (v.first != versions.front().first) {
            throw LedgerError("mixed ledger versions: " + versions.front().first + " (" + versions.front().second +
                              ") and " + v.first + " (" + v.second + ")");
        }
    }
    std::vector<AttackRunRecord> out;
    for (const auto& p : paths) {
        std::ifstream in(p);
        out.push_back(read_ledger(in));
    }
    return out;
}

struct EvaluateOptions {
    CommandOptions common;
    std::vector<fs::path> ledgers;
    std::vector<std::size_t> k_values{1, 2, 3};
};

/// One report per run method, in order of first appearance.
inline std::vector<EvalReport> evaluate_records(const std::vector<AttackRunRecord>& records,
                                               const std::vector<FeatureVector>& real, const std::vector<std::size_t>& ks,
                                               const EvalGateways& gw) {
    std::vector<RunMethod> order;
    for (const auto& r : records) {
        if (std::find(order.begin(), order.end(), r.method()) == order.end()) order.push_back(r.method());
    }
    std::vector<EvalReport> reports;
    for (auto method : order) {
        std::vector<const AttackRunRecord*> group;
        for (const auto& r : records) {
            if (r.method() == method) group.push_back(&r);
        }
        reports.push_back(evaluate_attack_set(group, real, ks, gw, std::string(to_string(method))));
    }
    return reports;
}

inline int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded("evaluate", opts.common.out.value_or("out"), err, [&](fs::path& dir) {
        RunManifest m = detail::prepare(opts.common, dir);
        auto gw = build_gateways(m);
        detail::require(gw.eval.eval_motion, "eval_motion_encoder");
        detail::require(gw.eval.eval_text, "eval_text_encoder");
        detail::require(gw.eval.similarity_text, "text_encoder");
        const auto records = read_ledgers(opts.ledgers);

        std::vector<FeatureVector> real;
        if (!m.real_motions.empty()) {
            for (const auto& p : m.real_motions) real.push_back(gw.eval.eval_motion->encode(load_clip(p.string())));
        } else {
            for (const auto& r : records) real.push_back(gw.eval.eval_motion->encode(r.target_motion()));
        }
        const auto reports = evaluate_records(records, real, opts.k_values, gw.eval);
        std::ostringstream jsonl;
        write_report(jsonl, reports, opts.k_values);
        const std::string table = render_report_table(reports, opts.k_values);
        write_text(dir / "report.jsonl", jsonl.str());
        write_text(dir / "report.txt", table);
        out << table;
        bool any_ok = false;
        for (const auto& r : reports) any_ok |= r.status == "ok";
        const int code = any_ok ? kExitCompleted : kExitNoFeasible;
        write_status(dir, "evaluate", any_ok ? "ok" : "no_completed_records", code);
        return code;
    });
}

inline int cmd_inspect(const fs::path& ledger, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        const auto records = read_ledgers({ledger});
        const auto& r = records.front();
        out << "method: " << to_string(r.method()) << '\n'
            << "status: " << to_string(r.status()) << '\n'
            << "target: \"" << r.target_prompt().text() << "\"\n"
            << "config: " << to_json_value(r.config()).dump() << '\n'
            << "states: " << r.states().size() << ", victim queries: " << r.victim_queries()
            << ", llm calls: " << r.llm_calls() << ", score failures: " << r.failures().size() << '\n';
        for (const auto& s : r.states()) {
            out << "  [" << s.step_index << "] " << to_string(s.parity) << "  prompts=" << s.prompts.size();
            if (s.scores && !s.scores->empty()) {
                double best = -2;
                for (const auto& sp : *s.scores) best = std::max(best, sp.motion_sim);
                out << "  scored=" << s.scores->size() << "  round_best=" << format_fixed(best, 4);
            }
            out << '\n';
        }
        if (r.best()) {
            out << "best: \"" << r.best()->prompt.text() << "\" motion_sim=" << format_fixed(r.best()->motion_sim, 4)
                << " text_sim=" << format_fixed(r.best()->text_sim, 4) << " round=" << r.best()->prompt.round_index() << '\n';
        }
        return kExitCompleted;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace prompt_siege::cli
