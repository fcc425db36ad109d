#include <CLI11.hpp>

#include "prompt_siege/cli/commands.hpp"

using namespace prompt_siege::cli;

namespace {

void add_common(CLI::App* sub, CommandOptions& o) {
    sub->add_option("-m,--manifest", o.manifest, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override config.run_seed");
    sub->add_option("--budget", o.budget, "Override config.max_victim_queries");
    sub->add_option("--cache-dir", o.cache_dir, "On-disk victim query cache");
    sub->add_option("-o,--out", o.out, "Output directory (overrides the manifest)");
    sub->add_flag("--no-cache", o.no_cache, "Disable query caching");
    sub->add_flag("--normalize-timestamps", o.normalize_timestamps, "Omit wall-clock fields from the ledger");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Black-box adversarial prompt search against text-to-motion models"};
    app.require_subcommand(1);

    CommandOptions attack_opts;
    auto* attack = app.add_subcommand("attack", "Run the LLM-agent attack");
    add_common(attack, attack_opts);
    attack->add_flag("--plot", attack_opts.plot, "Also write curves.svg");

    CommandOptions baseline_opts;
    auto* baseline = app.add_subcommand("baseline", "Run the word-perturbation baseline");
    add_common(baseline, baseline_opts);
    baseline->add_flag("--plot", baseline_opts.plot, "Also write curves.svg");

    EvaluateOptions eval_opts;
    bool no_rprecision = false;
    auto* evaluate = app.add_subcommand("evaluate", "Score a set of run ledgers");
    add_common(evaluate, eval_opts.common);
    evaluate->add_option("ledgers", eval_opts.ledgers, "Ledger files")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--k", eval_opts.k_values, "R-precision k values")->delimiter(',');
    evaluate->add_flag("--no-r-precision", no_rprecision, "Skip the R-precision section");

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "Summarize a ledger");
    inspect->add_option("ledger", inspect_path, "Ledger file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    if (*attack) return cmd_attack(attack_opts);
    if (*baseline) return cmd_baseline(baseline_opts);
    if (*evaluate) {
        if (no_rprecision) eval_opts.k_values.clear();
        return cmd_evaluate(eval_opts);
    }
    if (*inspect) return cmd_inspect(inspect_path);
    return kExitUsage;
}
