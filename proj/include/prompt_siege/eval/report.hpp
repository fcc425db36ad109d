#pragma once

#include <iomanip>
#include <sstream>

#include "prompt_siege/core/serialize.hpp"
#include "prompt_siege/eval/perplexity.hpp"
#include "prompt_siege/eval/retrieval.hpp"
#include "prompt_siege/eval/stats.hpp"
#include "prompt_siege/mmic/contrast.hpp"
#include "prompt_siege/mmic/similarity.hpp"

namespace prompt_siege {

inline double adversarial_similarity(const Prompt& adv, const Prompt& target, TextEncoderGateway& encoder) {
    // Canonical order, so the value is bit-identical under swapping.
    const bool swap = target.text() < adv.text();
    const auto a = encoder.encode((swap ? target : adv).text());
    const auto b = encoder.encode((swap ? adv : target).text());
    return cosine(a, b);
}

inline constexpr std::string_view kReportFormat = "prompt-siege-report/1";

struct ReportRow {
    RunMethod method;
    RunStatus status;
    std::string target_prompt;
    std::optional<std::string> best_prompt;
    std::optional<double> motion_sim;
    std::optional<double> text_sim;
    std::optional<double> ppl;
    std::optional<double> adversarial_similarity;
    std::size_t victim_queries = 0;
    std::size_t llm_calls = 0;

    bool operator==(const ReportRow&) const = default;
};

struct RPrecisionSection {
    std::map<std::size_t, std::size_t> hits;
    std::size_t items = 0;
    std::size_t batches = 0;

    bool operator==(const RPrecisionSection&) const = default;
};

struct EvalReport {
    std::string label;
    std::string status;  // "ok" or "no_completed_records"
    std::size_t records = 0;
    std::size_t completed = 0;
    std::optional<RPrecisionSection> r_precision;
    std::optional<double> fid;
    std::optional<double> multimodal_distance;
    std::optional<double> mean_ppl;
    std::optional<double> mean_adversarial_similarity;
    std::size_t victim_queries = 0;
    std::size_t llm_calls = 0;
    std::vector<ReportRow> rows;
    std::vector<std::string> warnings;

    bool operator==(const EvalReport&) const = default;
};

namespace detail {

// Mean, plus covariance when at least two samples exist (zero otherwise).
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(const std::vector<FeatureVector>& f) {
    if (f.size() >= 2) {
        auto s = gaussian_stats(f);
        return {s.mean, s.cov};
    }
    const Eigen::MatrixXd X = feature_matrix(f);
    return {X.row(0).transpose(), Eigen::MatrixXd::Zero(X.cols(), X.cols())};
}

}  // namespace detail

/// Scores a set of runs. Only completed runs (those with a feasible best
/// prompt and its clip) enter the metrics; the rest are listed in the rows.
/// R-precision is computed over consecutive batches of 20 items.
inline EvalReport evaluate_attack_set(const std::vector<const AttackRunRecord*>& records,
                                      const std::vector<FeatureVector>& real_motion_features,
                                      const std::vector<std::size_t>& k_values, const EvalGateways& gw,
                                      std::string label = "all") {
    if (records.empty()) throw ValidationError("evaluate_attack_set needs at least one record");
    if (!gw.eval_motion) throw GatewayError("eval_motion_encoder", "unbound");
    if (!gw.eval_text) throw GatewayError("eval_text_encoder", "unbound");
    if (!gw.similarity_text) throw GatewayError("text_encoder", "unbound");

    EvalReport rep;
    rep.label = std::move(label);
    rep.records = records.size();
    std::vector<FeatureVector> gen, txt;
    std::vector<double> ppls, advs;
    std::vector<std::string> texts;
    for (const auto* r : records) {
        ReportRow row{r->method(), r->status(), r->target_prompt().text()};
        row.victim_queries = r->victim_queries();
        row.llm_calls = r->llm_calls();
        rep.victim_queries += row.victim_queries;
        rep.llm_calls += row.llm_calls;
        if (r->status() == RunStatus::completed && r->best() && r->best_motion()) {
            const auto& best = *r->best();
            row.best_prompt = best.prompt.text();
            row.motion_sim = best.motion_sim;
            row.text_sim = best.text_sim;
            row.adversarial_similarity = adversarial_similarity(best.prompt, r->target_prompt(), *gw.similarity_text);
            advs.push_back(*row.adversarial_similarity);
            if (gw.ppl) {
                row.ppl = perplexity(best.prompt.text(), *gw.ppl);
                ppls.push_back(*row.ppl);
            }
            gen.push_back(gw.eval_motion->encode(*r->best_motion()));
            txt.push_back(gw.eval_text->encode(r->target_prompt().text()));
            texts.push_back(r->target_prompt().text());
            ++rep.completed;
        }
        rep.rows.push_back(std::move(row));
    }
    if (rep.completed == 0) {
        rep.status = "no_completed_records";
        return rep;
    }
    rep.status = "ok";

    if (gw.eval_motion->descriptor().feature_dim != gw.eval_text->descriptor().feature_dim) {
        throw ValidationError("eval encoders do not share a feature space");
    }

    if (!k_values.empty()) {
        RPrecisionSection sec;
        for (auto k : k_values) sec.hits[k] = 0;
        for (std::size_t start = 0; start < gen.size(); start += kStandardBatchSize) {
            const std::size_t end = std::min(gen.size(), start + kStandardBatchSize);
            const std::vector<FeatureVector> m(gen.begin() + start, gen.begin() + end);
            const std::vector<FeatureVector> t(txt.begin() + start, txt.begin() + end);
            const std::size_t n = end - start;
            std::vector<std::size_t> ks;
            for (auto k : k_values) ks.push_back(std::min(k, n));
            std::sort(ks.begin(), ks.end());
            ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
            const auto rp = r_precision(m, t, ks);
            for (auto k : k_values) sec.hits[k] += rp.hits.at(std::min(k, n));
            if (n != kStandardBatchSize) {
                rep.warnings.push_back("r_precision batch " + std::to_string(sec.batches) + " has non-standard size " +
                                       std::to_string(n));
            }
            for (auto k : k_values) {
                if (k > n) {
                    rep.warnings.push_back("r_precision k=" + std::to_string(k) + " exceeds batch " +
                                           std::to_string(sec.batches) + " size; counted as k=" + std::to_string(n));
                }
            }
            std::set<std::string> seen;
            for (std::size_t i = start; i < end; ++i) {
                if (!seen.insert(texts[i]).second) {
                    rep.warnings.push_back("r_precision batch " + std::to_string(sec.batches) +
                                           " has duplicate texts; ranking uses index tie-break");
                    break;
                }
            }
            sec.items += n;
            ++sec.batches;
        }
        rep.r_precision = std::move(sec);
    }

    if (real_motion_features.empty()) {
        rep.warnings.push_back("no real motion features; FID omitted");
    } else {
        if (gen.size() < 2) rep.warnings.push_back("FID: fewer than 2 generated samples, covariance taken as zero");
        if (real_motion_features.size() < 2) rep.warnings.push_back("FID: fewer than 2 real samples, covariance taken as zero");
        const auto [mg, cg] = detail::moments(gen);
        const auto [mr, cr] = detail::moments(real_motion_features);
        rep.fid = detail::frechet_distance(mg, cg, mr, cr);
    }

    rep.multimodal_distance = multimodal_distance(gen, txt);
    if (!ppls.empty()) {
        double s = 0;
        for (double v : ppls) s += v;
        rep.mean_ppl = s / static_cast<double>(ppls.size());
    } else {
        rep.warnings.push_back("no perplexity scorer bound; PPL omitted");
    }
    double s = 0;
    for (double v : advs) s += v;
    rep.mean_adversarial_similarity = s / static_cast<double>(advs.size());
    return rep;
}

// ---------------------------------------------------------------------------
// Persistence and rendering
// ---------------------------------------------------------------------------

inline json to_json_value(const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["kind"] = "report";
    j["label"] = r.label;
    j["status"] = r.status;
    j["records"] = r.records;
    j["completed"] = r.completed;
    if (r.r_precision) {
        json hits = json::object();
        for (const auto& [k, v] : r.r_precision->hits) hits[std::to_string(k)] = v;
        j["r_precision"] = {{"hits", hits}, {"items", r.r_precision->items}, {"batches", r.r_precision->batches}};
    }
    j["fid"] = opt(r.fid);
    j["multimodal_distance"] = opt(r.multimodal_distance);
    j["mean_ppl"] = opt(r.mean_ppl);
    j["mean_adversarial_similarity"] = opt(r.mean_adversarial_similarity);
    j["victim_queries"] = r.victim_queries;
    j["llm_calls"] = r.llm_calls;
    j["warnings"] = r.warnings;
    json rows = json::array();
    for (const auto& row : r.rows) {
        json x;
        x["method"] = to_string(row.method);
        x["status"] = to_string(row.status);
        x["target_prompt"] = row.target_prompt;
        x["best_prompt"] = row.best_prompt ? json(*row.best_prompt) : json(nullptr);
        x["motion_sim"] = opt(row.motion_sim);
        x["text_sim"] = opt(row.text_sim);
        x["ppl"] = opt(row.ppl);
        x["adversarial_similarity"] = opt(row.adversarial_similarity);
        x["victim_queries"] = row.victim_queries;
        x["llm_calls"] = row.llm_calls;
        rows.push_back(std::move(x));
    }
    j["rows"] = std::move(rows);
    return j;
}

inline void write_report(std::ostream& out, const std::vector<EvalReport>& reports,
                         const std::vector<std::size_t>& k_values) {
    json header{{"format", kReportFormat}, {"kind", "header"}, {"k_values", k_values}};
    out << header.dump() << '\n';
    for (const auto& r : reports) out << to_json_value(r).dump() << '\n';
}

/// Aligned text table, one column per report, identical rows for every column.
inline std::string render_report_table(const std::vector<EvalReport>& reports, const std::vector<std::size_t>& k_values) {
    auto num = [](const std::optional<double>& v) { return v ? format_fixed(*v, 4) : std::string("-"); };
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    auto add = [&](std::string name, auto cell) {
        std::vector<std::string> cells;
        for (const auto& r : reports) cells.push_back(cell(r));
        rows.emplace_back(std::move(name), std::move(cells));
    };
    add("status", [](const EvalReport& r) { return r.status; });
    add("records", [](const EvalReport& r) { return std::to_string(r.completed) + "/" + std::to_string(r.records); });
    for (auto k : k_values) {
        add("R-" + std::to_string(k), [k](const EvalReport& r) {
            if (!r.r_precision) return std::string("-");
            return std::to_string(r.r_precision->hits.at(k)) + "/" + std::to_string(r.r_precision->items);
        });
    }
    add("FID", [&](const EvalReport& r) { return num(r.fid); });
    add("d_MM", [&](const EvalReport& r) { return num(r.multimodal_distance); });
    add("PPL", [&](const EvalReport& r) { return num(r.mean_ppl); });
    add("AS", [&](const EvalReport& r) { return num(r.mean_adversarial_similarity); });
    add("victim queries", [](const EvalReport& r) { return std::to_string(r.victim_queries); });
    add("LLM calls", [](const EvalReport& r) { return std::to_string(r.llm_calls); });

    std::size_t w0 = std::string("metric").size();
    for (const auto& [name, _] : rows) w0 = std::max(w0, name.size());
    std::vector<std::size_t> w;
    for (std::size_t c = 0; c < reports.size(); ++c) {
        std::size_t width = reports[c].label.size();
        for (const auto& [_, cells] : rows) width = std::max(width, cells[c].size());
        w.push_back(width);
    }
    std::ostringstream out;
    auto line = [&](const std::string& first, auto cell) {
        out << std::left << std::setw(static_cast<int>(w0)) << first;
        for (std::size_t c = 0; c < w.size(); ++c) out << "  " << std::right << std::setw(static_cast<int>(w[c])) << cell(c);
        out << '\n';
    };
    line("metric", [&](std::size_t c) { return reports[c].label; });
    out << std::string(w0, '-');
    for (auto x : w) out << "  " << std::string(x, '-');
    out << '\n';
    for (const auto& [name, cells] : rows) line(name, [&](std::size_t c) { return cells[c]; });
    return out.str();
}

}  // namespace prompt_siege
