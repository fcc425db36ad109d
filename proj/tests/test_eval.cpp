#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "support.hpp"

using namespace prompt_siege;

namespace {

std::vector<FeatureVector> random_features(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                           FeatureSpace space = FeatureSpace::eval_motion) {
    std::normal_distribution<double> g;
    std::vector<FeatureVector> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) x = g(rng);
        out.emplace_back(std::move(v), space);
    }
    return out;
}

FeatureVector fv(std::vector<double> v, FeatureSpace s = FeatureSpace::eval_motion) { return FeatureVector(std::move(v), s); }

// Rank of the aligned text by counting strictly closer texts plus equally
// close ones with a smaller index.
std::size_t brute_rank(const std::vector<FeatureVector>& m, const std::vector<FeatureVector>& t, std::size_t i) {
    auto dist = [&](std::size_t j) {
        double s = 0;
        for (std::size_t d = 0; d < m[i].dim(); ++d) s += (m[i][d] - t[j][d]) * (m[i][d] - t[j][d]);
        return s;
    };
    const double own = dist(i);
    std::size_t rank = 0;
    for (std::size_t j = 0; j < t.size(); ++j) {
        const double dj = dist(j);
        if (dj < own || (dj == own && j < i)) ++rank;
    }
    return rank;
}

// 2x2 closed form: Tr sqrt(AB) = sqrt(tr(AB) + 2 sqrt(det(AB))).
double frechet_2x2(const double mu_a[2], const double A[2][2], const double mu_b[2], const double B[2][2]) {
    const double ab00 = A[0][0] * B[0][0] + A[0][1] * B[1][0];
    const double ab11 = A[1][0] * B[0][1] + A[1][1] * B[1][1];
    const double detA = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    const double detB = B[0][0] * B[1][1] - B[0][1] * B[1][0];
    const double tr_sqrt = std::sqrt(ab00 + ab11 + 2 * std::sqrt(detA * detB));
    const double dm = (mu_a[0] - mu_b[0]) * (mu_a[0] - mu_b[0]) + (mu_a[1] - mu_b[1]) * (mu_a[1] - mu_b[1]);
    return dm + A[0][0] + A[1][1] + B[0][0] + B[1][1] - 2 * tr_sqrt;
}

std::vector<FeatureVector> sample_2d(std::mt19937_64& rng, std::size_t n, const double mu[2], const double C[2][2]) {
    const double l00 = std::sqrt(C[0][0]);
    const double l10 = C[1][0] / l00;
    const double l11 = std::sqrt(C[1][1] - l10 * l10);
    std::normal_distribution<double> g;
    std::vector<FeatureVector> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double z0 = g(rng), z1 = g(rng);
        out.push_back(fv({mu[0] + l00 * z0, mu[1] + l10 * z0 + l11 * z1}));
    }
    return out;
}

// Fréchet distance via the eigenvalues of the (non-symmetric) product.
double frechet_eigen(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    auto moments = [](const std::vector<std::vector<double>>& x) {
        const std::size_t n = x.size(), d = x[0].size();
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
        for (const auto& r : x)
            for (std::size_t j = 0; j < d; ++j) mu(j) += r[j] / n;
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
        if (n >= 2) {
            for (const auto& r : x)
                for (std::size_t p = 0; p < d; ++p)
                    for (std::size_t q = 0; q < d; ++q) c(p, q) += (r[p] - mu(p)) * (r[q] - mu(q)) / (n - 1);
        }
        return std::make_pair(mu, c);
    };
    const auto [ma, ca] = moments(a);
    const auto [mb, cb] = moments(b);
    Eigen::EigenSolver<Eigen::MatrixXd> es(ca * cb, false);
    double tr = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
    return (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2 * tr;
}

struct UniformScorer : PerplexityBackend {
    double V;
    explicit UniformScorer(double v) : V(v) {}
    GatewayDescriptor descriptor() const override { return {GatewayKind::ppl_scorer, "uniform", std::nullopt, 1, true}; }
    std::vector<double> token_nll(std::string_view text) override {
        return std::vector<double>(tokenize_count(text), std::log(V));
    }
    static std::size_t tokenize_count(std::string_view text) { return testbed::tokenize(text).size(); }
};

struct CertainScorer : PerplexityBackend {
    GatewayDescriptor descriptor() const override { return {GatewayKind::ppl_scorer, "certain", std::nullopt, 1, true}; }
    std::vector<double> token_nll(std::string_view text) override {
        return std::vector<double>(testbed::tokenize(text).size(), 0.0);
    }
};

}  // namespace

TEST(GaussianStats, TwoPointFormula) {
    const auto s = gaussian_stats({fv({0, 0}), fv({2, 0})});
    EXPECT_DOUBLE_EQ(s.mean(0), 1.0);
    EXPECT_DOUBLE_EQ(s.mean(1), 0.0);
    EXPECT_DOUBLE_EQ(s.cov(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(s.cov(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.cov(1, 1), 0.0);
}

TEST(GaussianStats, IdenticalVectorsHaveZeroCovariance) {
    const auto s = gaussian_stats({fv({1.5, -2}), fv({1.5, -2}), fv({1.5, -2})});
    EXPECT_EQ(s.cov.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GaussianStats, MatchesTwoPassOracle) {
    std::mt19937_64 rng(12);
    const auto f = random_features(rng, 1000, 5);
    const auto s = gaussian_stats(f);
    std::vector<long double> mu(5, 0);
    for (const auto& x : f)
        for (int j = 0; j < 5; ++j) mu[j] += x[j];
    for (auto& m : mu) m /= 1000;
    for (int p = 0; p < 5; ++p) {
        EXPECT_NEAR(s.mean(p), static_cast<double>(mu[p]), 1e-9);
        for (int q = 0; q < 5; ++q) {
            long double c = 0;
            for (const auto& x : f) c += (x[p] - mu[p]) * (x[q] - mu[q]);
            EXPECT_NEAR(s.cov(p, q), static_cast<double>(c / 999), 1e-9);
        }
    }
}

TEST(GaussianStats, Preconditions) {
    EXPECT_THROW(gaussian_stats({fv({1})}), ValidationError);
    EXPECT_THROW(gaussian_stats({fv({1}), fv({1, 2})}), ValidationError);
    Eigen::MatrixXd asym(2, 2);
    asym << 1, 0.5, 0.2, 1;
    EXPECT_THROW(GaussianStats(Eigen::VectorXd::Zero(2), asym, 5), ValidationError);
}

TEST(Fid, OneDimensionalClosedForm) {
    const GaussianStats a(Eigen::VectorXd::Constant(1, 0.0), Eigen::MatrixXd::Constant(1, 1, 1.0), 10);
    const GaussianStats b(Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 1.0), 10);
    EXPECT_NEAR(fid(a, b), 1.0, 1e-9);
}

TEST(Fid, SelfDistanceAndSymmetry) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = gaussian_stats(random_features(rng, 50, 6));
        const auto b = gaussian_stats(random_features(rng, 40, 6));
        EXPECT_NEAR(fid(a, a), 0.0, 1e-6);
        EXPECT_NEAR(fid(a, b), fid(b, a), 1e-9);
        EXPECT_GE(fid(a, b), 0.0);
    }
}

TEST(Fid, SampledTwoDimensionalGaussians) {
    const double mu_a[2] = {0, 0}, mu_b[2] = {1, -1};
    const double A[2][2] = {{2, 0.5}, {0.5, 1}}, B[2][2] = {{1, -0.3}, {-0.3, 0.5}};
    std::mt19937_64 rng(5);
    const auto sa = gaussian_stats(sample_2d(rng, 10000, mu_a, A));
    const auto sb = gaussian_stats(sample_2d(rng, 10000, mu_b, B));
    EXPECT_NEAR(fid(sa, sb), frechet_2x2(mu_a, A, mu_b, B), 0.05);
}

TEST(Fid, RankDeficientCovariances) {
    // Features that live on a line: singular covariance must still work.
    std::vector<FeatureVector> a, b;
    for (int i = 0; i < 20; ++i) {
        a.push_back(fv({double(i), 2.0 * i, 0}));
        b.push_back(fv({double(i) + 1, 2.0 * i, 0}));
    }
    EXPECT_NEAR(fid(gaussian_stats(a), gaussian_stats(b)), 1.0, 1e-6);
}

TEST(RPrecision, AlignedIdenticalPoints) {
    std::mt19937_64 rng(3);
    auto m = random_features(rng, 20, 8);
    const auto r = r_precision(m, m, {1, 20});
    EXPECT_EQ(r.hits.at(1), 20u);
    EXPECT_EQ(r.hits.at(20), 20u);
    EXPECT_THROW(r_precision(m, m, {21}), ValidationError);
    EXPECT_THROW(r_precision(m, m, {0}), ValidationError);
}

TEST(RPrecision, BruteForceOracleOnRandomBatches) {
    std::mt19937_64 rng(99);
    const std::vector<std::size_t> ks{1, 2, 3, 5, 10, 20};
    for (int b = 0; b < 50; ++b) {
        const auto m = random_features(rng, 20, 4);
        const auto t = random_features(rng, 20, 4);
        const auto r = r_precision(m, t, ks);
        for (auto k : ks) {
            std::size_t hits = 0;
            for (std::size_t i = 0; i < 20; ++i) hits += brute_rank(m, t, i) < k;
            EXPECT_EQ(r.hits.at(k), hits);
        }
        EXPECT_EQ(r.hits.at(20), 20u);
    }
}

TEST(RPrecision, TiesKeepIndexOrder) {
    // Every text equidistant from every motion: rank equals the index.
    std::vector<FeatureVector> m(4, fv({0, 0})), t(4, fv({1, 0}));
    const auto r = r_precision(m, t, {1, 2});
    EXPECT_EQ(r.hits.at(1), 1u);
    EXPECT_EQ(r.hits.at(2), 2u);
}

TEST(RPrecision, BatchWarnsOnDuplicatesAndSize) {
    EvalBatch batch;
    batch.motion_encoder = testbed::synth_eval_motion_gateway();
    batch.text_encoder = testbed::synth_eval_text_gateway();
    for (std::string t : {"a person hops", "a person hops", "a person walks"}) {
        batch.items.push_back({testbed::synth_generate(t, 0), t, testbed::synth_generate(t, 0)});
    }
    const auto r = r_precision(batch, {1, 3});
    EXPECT_EQ(r.warnings.size(), 2u);
    EXPECT_EQ(r.hits.at(3), 3u);
    EXPECT_FALSE(batch.standard_size());
}

TEST(MultimodalDistance, Examples) {
    EXPECT_DOUBLE_EQ(multimodal_distance({fv({0, 0})}, {fv({3, 4})}), 5.0);
    std::mt19937_64 rng(1);
    const auto m = random_features(rng, 20, 3);
    EXPECT_EQ(multimodal_distance(m, m), 0.0);
    const auto t = random_features(rng, 20, 3);
    double sum = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        double s = 0;
        for (std::size_t d = 0; d < 3; ++d) s += (m[i][d] - t[i][d]) * (m[i][d] - t[i][d]);
        sum += std::sqrt(s);
    }
    EXPECT_NEAR(multimodal_distance(m, t), sum / 20, 1e-12);
    EXPECT_THROW(multimodal_distance({fv({0, 0})}, {fv({0, 0, 0}, FeatureSpace::eval_text)}), ValidationError);
    EvalBatch mismatched;
    mismatched.motion_encoder = testbed::synth_eval_motion_gateway();
    mismatched.text_encoder = testbed::synth_text_gateway();
    mismatched.items.push_back({testbed::synth_generate("hop", 0), "hop", testbed::synth_generate("hop", 0)});
    EXPECT_THROW(multimodal_distance(mismatched), ValidationError);
}

TEST(Perplexity, UniformAndCertainScorers) {
    PerplexityGateway uniform(std::make_shared<UniformScorer>(37));
    for (std::string t : {"a person walks", "x", "the quick brown fox jumps over it"}) {
        EXPECT_NEAR(perplexity(t, uniform), 37.0, 1e-9);
    }
    PerplexityGateway certain(std::make_shared<CertainScorer>());
    EXPECT_DOUBLE_EQ(perplexity("a person walks", certain), 1.0);
    EXPECT_THROW(perplexity("  ", certain), ValidationError);
}

TEST(Perplexity, TrigramPrefersFluentText) {
    TrigramScorer scorer;
    EXPECT_GT(scorer.vocabulary_size(), 20u);
    PerplexityGateway gw(std::make_shared<TrigramScorer>());
    const std::string fluent = "a person walks forward slowly";
    std::string shuffled = fluent;
    std::mt19937_64 rng(0);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_LT(perplexity(fluent, gw), perplexity(shuffled, gw));
    EXPECT_EQ(TrigramScorer::normalize("  A   Person\tWALKS "), "a person walks");
    // The end symbol is scored, so there is one term per character plus one.
    EXPECT_EQ(scorer.token_nll("abc").size(), 4u);
    // Add-one smoothing bounds every term by log(count + V).
    for (double v : scorer.token_nll("qqqq")) EXPECT_GT(v, 0.0);
}

TEST(AdversarialSimilarity, Examples) {
    auto enc = testbed::synth_text_gateway();
    const Prompt t = Prompt::initial("a person jumps in place");
    EXPECT_NEAR(adversarial_similarity(t, t, *enc), 1.0, 1e-12);
    std::string w1, w2;
    const auto dict = testbed::PrimitiveTable::builtin().dictionary();
    for (const auto& a : dict)
        for (const auto& b : dict)
            if (w1.empty() && oracle::bucket(a, 203) != oracle::bucket(b, 203)) w1 = a, w2 = b;
    EXPECT_NEAR(adversarial_similarity(Prompt::initial(w1), Prompt::initial(w2), *enc), 0.0, 1e-12);
    const Prompt adv("someone hops quickly", PromptOrigin::refined, 4);
    EXPECT_NEAR(adversarial_similarity(adv, t, *enc),
                oracle::cos(oracle::text_vector(adv.text()), oracle::text_vector(t.text())), 1e-12);
    EXPECT_EQ(adversarial_similarity(adv, t, *enc), adversarial_similarity(t, adv, *enc));
}

TEST(EvaluateAttackSet, IdentityPools) {
    ps_test::ScriptedTrace trace;
    const auto rec = trace.run(1);
    ASSERT_EQ(rec.status(), RunStatus::completed);
    auto gw = ps_test::testbed_eval_gateways();
    const auto real = std::vector<FeatureVector>{gw.eval_motion->encode(trace.target_motion)};
    const auto rep = evaluate_attack_set({&rec}, real, {1, 2, 3}, gw);
    EXPECT_EQ(rep.status, "ok");
    ASSERT_TRUE(rep.fid);
    EXPECT_NEAR(*rep.fid, 0.0, 1e-12);
    const auto expected_mm = euclidean(gw.eval_motion->encode(trace.target_motion), gw.eval_text->encode(trace.kTarget));
    EXPECT_NEAR(*rep.multimodal_distance, expected_mm, 1e-12);
    ASSERT_TRUE(rep.r_precision);
    EXPECT_EQ(rep.r_precision->hits.at(1), 1u);
    EXPECT_EQ(rep.r_precision->hits.at(3), 1u);
    EXPECT_TRUE(rep.mean_ppl);
    EXPECT_TRUE(rep.mean_adversarial_similarity);
    EXPECT_FALSE(rep.warnings.empty());
}

TEST(EvaluateAttackSet, EmptyKValuesOmitRPrecision) {
    ps_test::ScriptedTrace trace;
    const auto rec = trace.run(1);
    const auto rep = evaluate_attack_set({&rec}, {}, {}, ps_test::testbed_eval_gateways());
    EXPECT_FALSE(rep.r_precision);
    EXPECT_FALSE(rep.fid);
    EXPECT_TRUE(rep.multimodal_distance);
    EXPECT_EQ(to_json_value(rep).contains("r_precision"), false);
}

TEST(EvaluateAttackSet, NoCompletedRecords) {
    ps_test::ScriptedTrace trace;
    auto cfg = trace.config(1);
    cfg.eta = 0.0;
    const auto rec = run_attack(Prompt::initial(trace.kTarget), trace.target_motion, cfg, trace.templates, trace.gateways());
    const auto rep = evaluate_attack_set({&rec}, {}, {1}, ps_test::testbed_eval_gateways());
    EXPECT_EQ(rep.status, "no_completed_records");
    EXPECT_FALSE(rep.fid);
    EXPECT_FALSE(rep.multimodal_distance);
    EXPECT_EQ(rep.rows.size(), 1u);
}

TEST(EvaluateAttackSet, SuiteMatchesRecomputationFromLedgers) {
    const std::string table = std::string(PS_SOURCE_DIR) + "/data/primitives.json";
    std::vector<AttackRunRecord> records;
    for (const auto* sc : testbed::suite()) {
        const auto rec = ps_test::run_scenario(sc->name, ps_test::scenario_config(7, 2, 6));
        std::istringstream in(ledger_to_string(rec));
        records.push_back(read_ledger(in));
    }
    std::vector<const AttackRunRecord*> ptrs;
    for (const auto& r : records) ptrs.push_back(&r);

    auto gw = ps_test::testbed_eval_gateways();
    std::vector<FeatureVector> real;
    std::vector<std::vector<double>> real_raw;
    for (const auto& r : records) {
        real.push_back(gw.eval_motion->encode(r.target_motion()));
        const auto v = real.back().values();
        real_raw.emplace_back(v.begin(), v.end());
    }
    const std::vector<std::size_t> ks{1, 2, 3};
    const auto rep = evaluate_attack_set(ptrs, real, ks, gw);

    // Oracle side: everything from the ledger contents and the table file.
    std::vector<std::vector<double>> gen, txt;
    std::vector<FeatureVector> gen_fv, txt_fv;
    double ppl_sum = 0, as_sum = 0;
    TrigramScorer ppl;
    for (const auto& r : records) {
        if (r.status() != RunStatus::completed) continue;
        oracle::Path p;
        p.fps = r.best_motion()->fps();
        for (std::size_t t = 0; t < r.best_motion()->frame_count(); ++t) {
            const auto q = r.best_motion()->root(t);
            p.roots.push_back({q.x, q.y, q.z});
        }
        gen.push_back(oracle::motion_vector(p));
        txt.push_back(oracle::motion_vector(oracle::root_path(r.target_prompt().text(), table)));
        gen_fv.push_back(fv(gen.back()));
        txt_fv.push_back(fv(txt.back()));
        double nll = 0;
        const auto terms = ppl.token_nll(r.best()->prompt.text());
        for (double v : terms) nll += v;
        ppl_sum += std::exp(nll / terms.size());
        as_sum += oracle::cos(oracle::text_vector(r.best()->prompt.text()), oracle::text_vector(r.target_prompt().text()));
    }
    const std::size_t n = gen.size();
    ASSERT_GT(n, 1u);
    EXPECT_EQ(rep.completed, n);
    for (auto k : ks) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) hits += brute_rank(gen_fv, txt_fv, i) < k;
        EXPECT_EQ(rep.r_precision->hits.at(k), hits) << k;
    }
    double mm = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t d = 0; d < 8; ++d) s += (gen[i][d] - txt[i][d]) * (gen[i][d] - txt[i][d]);
        mm += std::sqrt(s) / n;
    }
    EXPECT_NEAR(*rep.multimodal_distance, mm, 1e-9);
    EXPECT_NEAR(*rep.fid, frechet_eigen(gen, real_raw), 1e-6 * std::max(1.0, *rep.fid));
    EXPECT_NEAR(*rep.mean_ppl, ppl_sum / n, 1e-9);
    EXPECT_NEAR(*rep.mean_adversarial_similarity, as_sum / n, 1e-12);
}

TEST(Report, JsonAndTableRendering) {
    ps_test::ScriptedTrace trace;
    const auto rec = trace.run(1);
    auto gw = ps_test::testbed_eval_gateways();
    auto a = evaluate_attack_set({&rec}, {gw.eval_motion->encode(trace.target_motion)}, {1}, gw, "agent");
    auto b = a;
    b.label = "baseline";
    std::ostringstream out;
    write_report(out, {a, b}, {1});
    std::istringstream in(out.str());
    std::string line;
    std::vector<json> docs;
    while (std::getline(in, line)) docs.push_back(json::parse(line));
    ASSERT_EQ(docs.size(), 3u);
    EXPECT_EQ(docs[0]["format"], std::string(kReportFormat));
    EXPECT_EQ(docs[1]["label"], "agent");
    const auto table = render_report_table({a, b}, {1});
    EXPECT_NE(table.find("agent"), std::string::npos);
    EXPECT_NE(table.find("baseline"), std::string::npos);
    EXPECT_NE(table.find("R-1"), std::string::npos);
    EXPECT_NE(table.find("FID"), std::string::npos);
}
