// End-to-end acceptance suite on the synthetic bilingual world. Prints one
// PASS/FAIL line per criterion and exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "xwm/attacks.hpp"
#include "xwm/clustering.hpp"
#include "xwm/embedding.hpp"
#include "xwm/hashing.hpp"
#include "xwm/kgw.hpp"
#include "xwm/metrics.hpp"
#include "xwm/parallel.hpp"
#include "xwm/sir.hpp"
#include "xwm/sir_model.hpp"
#include "xwm/uw.hpp"
#include "xwm/world.hpp"

namespace fs = std::filesystem;
using namespace xwm;

namespace {

// Tolerances and sizes, pinned.
constexpr double kKgwMinAuc = 0.99;
constexpr double kNullMeanBound = 0.1;
constexpr double kNullStdLow = 0.9;
constexpr double kNullStdHigh = 1.1;
constexpr double kUnbiasedTol = 0.01;
constexpr double kUwMinAuc = 0.95;
constexpr double kGradRelTol = 1e-4;
constexpr double kLossDrop = 0.5;
constexpr double kHeldOutCos = 0.9;
constexpr double kCwraMaxAuc = 0.75;
constexpr double kDefenseGap = 0.1;
constexpr double kMetricTol = 1e-9;
constexpr double kSpearmanMin = 0.8;
constexpr std::size_t kMinBins = 5;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// Shared world, language model, clustering and trained SIR / X-SIR models.
struct Bench {
    std::shared_ptr<const Vocabulary> vocab;
    BilingualDictionary dictionary;
    std::shared_ptr<const ToyLm> lm;
    std::shared_ptr<const SemanticClustering> clustering;
    std::shared_ptr<const ToyEmbedding> embedder;
    std::shared_ptr<const WatermarkModel> sir_model;
    std::shared_ptr<const WatermarkModel> xsir_model;
    std::vector<double> sir_curve;
    std::vector<double> xsir_curve;
    std::size_t jobs = 1;

    TrainingConfig training() const {
        TrainingConfig t;
        t.learning_rate = 1e-3;
        t.epochs = 12;
        t.batch_size = 32;
        t.seed = 21;
        return t;
    }

    PairSamplingConfig pair_config(std::uint64_t seed) const {
        PairSamplingConfig p;
        p.count = 1500;
        p.seed = seed;
        return p;
    }

    Bench() {
        auto world = make_world(WorldConfig{});
        vocab = std::make_shared<const Vocabulary>(std::move(world.vocab));
        dictionary = std::move(world.dictionary);
        lm = std::make_shared<const ToyLm>(vocab, ToyLmConfig{});
        clustering = std::make_shared<const SemanticClustering>(build_clustering(*vocab, dictionary));
        embedder = std::make_shared<const ToyEmbedding>(clustering, ToyEmbeddingConfig{});

        const auto pairs = make_training_pairs(*lm, *vocab, *clustering, *embedder, pair_config(3));
        WatermarkModel sir(embedder->dim(), vocab->size());
        sir.initialize(31);
        auto sir_result = train(std::move(sir), training(), pairs);
        sir_model = std::make_shared<const WatermarkModel>(std::move(sir_result.model));
        sir_curve = std::move(sir_result.loss_curve);

        const auto sizes = clustering->cluster_sizes();
        WatermarkModel xsir(embedder->dim(), clustering->num_clusters());
        xsir.initialize(32);
        auto xsir_result = train(std::move(xsir), training(), pairs, sizes);
        xsir_model = std::make_shared<const WatermarkModel>(std::move(xsir_result.model));
        xsir_curve = std::move(xsir_result.loss_curve);
    }

    std::vector<TokenSequence> prompts(std::size_t count, std::uint64_t seed, const char* lang = "en") const {
        return make_prompts(*lm, lang, count, 8, seed);
    }

    // Responses for each prompt; lengths[i] (or `length`) tokens, seed per text.
    std::vector<TokenSequence> generate_all(const std::vector<TokenSequence>& prompts,
                                            const std::vector<std::size_t>& lengths, const WatermarkEngine* engine,
                                            std::uint64_t seed) const {
        std::vector<TokenSequence> out(prompts.size());
        parallel_for(prompts.size(), jobs, [&](std::size_t i) {
            GenerationOptions options;
            options.max_len = lengths[i];
            options.seed = hash_combine(seed, i);
            out[i] = generate(*lm, prompts[i], options, engine);
        });
        return out;
    }

    std::vector<double> score_all(const WatermarkEngine& engine, const std::vector<TokenSequence>& texts,
                                  const std::vector<TokenSequence>* contexts = nullptr) const {
        std::vector<double> out(texts.size());
        parallel_for(texts.size(), jobs, [&](std::size_t i) {
            out[i] = contexts ? engine.score(texts[i], (*contexts)[i].ids).value : engine.score(texts[i]).value;
        });
        return out;
    }
};

std::vector<std::size_t> constant(std::size_t n, std::size_t value) { return std::vector<std::size_t>(n, value); }

// Lengths spread evenly over [lo, hi).
std::vector<std::size_t> spread(std::size_t n, std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (i * (hi - lo)) / n;
    return out;
}

double auc_of(const std::vector<double>& watermarked, const std::vector<double>& clean) {
    std::vector<DetectionRecord> records;
    for (double s : watermarked) records.push_back({s, Label::Watermarked});
    for (double s : clean) records.push_back({s, Label::Clean});
    return roc(records).auc;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stddev_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
}

// ---------------------------------------------------------------------------

Outcome kgw_detection_power(const Bench& bench) {
    const KgwConfig config{0.25, 2.0, 4};
    KgwEngine engine(config, bench.vocab->size());
    const auto wm_prompts = bench.prompts(200, 101);
    const auto clean_prompts = bench.prompts(1000, 102);
    const auto wm = bench.generate_all(wm_prompts, constant(200, 200), &engine, 103);
    const auto clean = bench.generate_all(clean_prompts, constant(1000, 200), nullptr, 104);
    const auto wm_scores = bench.score_all(engine, wm);
    const auto clean_scores = bench.score_all(engine, clean);
    const std::vector<double> clean_head(clean_scores.begin(), clean_scores.begin() + 200);
    const double auc = auc_of(wm_scores, clean_head);
    const double m = mean_of(clean_scores);
    const double sd = stddev_of(clean_scores);
    const bool pass = auc >= kKgwMinAuc && std::abs(m) <= kNullMeanBound && sd >= kNullStdLow && sd <= kNullStdHigh;
    return {pass, fmt("AUC=%.4f (>= %.2f); null z mean=%.4f (|.| <= %.1f), std=%.4f (in [%.1f, %.1f]), n=1000",
                      auc, kKgwMinAuc, m, kNullMeanBound, sd, kNullStdLow, kNullStdHigh)};
}

Outcome uw_unbiasedness(const Bench&) {
    const std::vector<double> p{0.27, 0.2, 0.15, 0.12, 0.1, 0.08, 0.05, 0.03};
    const std::vector<TokenId> prefix{3, 1, 4, 1, 5};
    std::vector<double> mean(p.size(), 0.0);
    const std::size_t draws = 100000;
    CounterRng keys(0x5eed);
    for (std::size_t n = 0; n < draws; ++n) {
        UwConfig config;
        config.hash_key = keys.next();
        mean[its_select(p, uw_uniform(prefix, config))] += 1.0 / draws;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(mean[i] - p[i]));
    return {worst <= kUnbiasedTol, fmt("max |E[P~] - P| = %.5f over 1e5 keys (<= %.2f)", worst, kUnbiasedTol)};
}

Outcome uw_detection(const Bench& bench) {
    UwEngine engine(UwConfig{}, bench.lm);
    const auto wm_prompts = bench.prompts(200, 201);
    const auto clean_prompts = bench.prompts(200, 202);
    const auto wm = bench.generate_all(wm_prompts, constant(200, 200), &engine, 203);
    const auto clean = bench.generate_all(clean_prompts, constant(200, 200), nullptr, 204);
    const double auc = auc_of(bench.score_all(engine, wm, &wm_prompts), bench.score_all(engine, clean, &clean_prompts));
    return {auc >= kUwMinAuc, fmt("AUC=%.4f (>= %.2f), 200 vs 200 texts of 200 tokens", auc, kUwMinAuc)};
}

Outcome xsir_cluster_invariant(const Bench& bench) {
    SirEngine engine({}, bench.embedder, bench.xsir_model, bench.clustering);
    std::vector<std::pair<TokenId, TokenId>> pairs;
    for (const auto& e : bench.dictionary.entries) {
        const auto a = bench.vocab->find(e.source);
        const auto b = bench.vocab->find(e.target);
        if (a && b) pairs.emplace_back(*a, *b);
    }
    auto prefixes = bench.prompts(25, 301, "en");
    const auto zh = bench.prompts(25, 302, "zh");
    prefixes.insert(prefixes.end(), zh.begin(), zh.end());
    prefixes.push_back(TokenSequence{{}, "en"});
    std::size_t checks = 0;
    std::size_t equal = 0;
    const std::vector<double> zeros(bench.vocab->size(), 0.0);
    for (const auto& prefix : prefixes) {
        const auto applied = engine.adjust(prefix, zeros);
        for (const auto& [a, b] : pairs) {
            ++checks;
            if (applied[a] == applied[b]) ++equal;
        }
    }
    return {checks > 0 && equal == checks,
            fmt("%zu/%zu bias pairs exactly equal (%zu dictionary pairs x %zu prefixes)", equal, checks, pairs.size(),
                prefixes.size())};
}

Outcome components_oracle(const Bench&) {
    CounterRng rng(0xc0ffee);
    std::size_t agree = 0;
    for (int g = 0; g < 100; ++g) {
        const std::size_t n = 1 + rng.below(50);
        const std::size_t m = rng.below(2 * n);
        std::vector<Edge> edges;
        for (std::size_t e = 0; e < m; ++e) {
            edges.emplace_back(static_cast<TokenId>(rng.below(n)), static_cast<TokenId>(rng.below(n)));
        }
        std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
        for (std::size_t i = 0; i < n; ++i) reach[i][i] = true;
        for (const auto& [a, b] : edges) reach[a][b] = reach[b][a] = true;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[i][k] && reach[k][j]) reach[i][j] = true;
        const auto c = connected_components(n, edges);
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i)
            for (std::size_t j = 0; j < n && ok; ++j)
                ok = reach[i][j] == (c.cluster_index(i) == c.cluster_index(j));
        if (ok) ++agree;
    }
    return {agree == 100, fmt("%zu/100 random graphs agree with transitive closure", agree)};
}

Outcome sir_trainer(const Bench& bench) {
    // Finite differences on a fresh model against a small batch.
    auto pairs = make_training_pairs(*bench.lm, *bench.vocab, *bench.clustering, *bench.embedder,
                                     PairSamplingConfig{16, 1, 16, 0.25, 0.5, 41});
    const auto sizes = bench.clustering->cluster_sizes();
    WatermarkModel model(bench.embedder->dim(), bench.clustering->num_clusters());
    model.initialize(43);
    const auto config = bench.training();
    std::vector<DenseLayer> grads;
    total_loss_gradient(model, pairs, config, sizes, grads);
    double worst = 0.0;
    CounterRng pick(47);
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        for (int c = 0; c < 10; ++c) {
            auto& w = model.layers()[l].weight;
            const std::size_t idx = pick.below(w.size());
            const double saved = w[idx];
            const double h = 1e-6;
            w[idx] = saved + h;
            const double up = total_loss(model, pairs, config, sizes);
            w[idx] = saved - h;
            const double down = total_loss(model, pairs, config, sizes);
            w[idx] = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads[l].weight[idx];
            const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            worst = std::max(worst, std::abs(numeric - analytic) / scale);
        }
    }

    const double drop_sir = 1.0 - bench.sir_curve.back() / bench.sir_curve.front();
    const double drop_xsir = 1.0 - bench.xsir_curve.back() / bench.xsir_curve.front();

    // Held-out prefixes and their cluster-equal translations.
    const auto held_out = make_training_pairs(*bench.lm, *bench.vocab, *bench.clustering, *bench.embedder,
                                              PairSamplingConfig{300, 1, 16, 1.0, 0.0, 4242});
    ModelDeltaSource source(bench.embedder, bench.sir_model);
    double cos_sum = 0.0;
    double cos_min = 1.0;
    for (const auto& p : held_out) {
        const double c = cosine_similarity(bench.sir_model->forward(p.x), bench.sir_model->forward(p.y));
        cos_sum += c;
        cos_min = std::min(cos_min, c);
    }
    const double cos_mean = cos_sum / held_out.size();
    const bool pass = worst <= kGradRelTol && drop_sir >= kLossDrop && drop_xsir >= kLossDrop && cos_mean >= kHeldOutCos;
    return {pass, fmt("grad rel err max=%.2e (<= 1e-4); loss drop SIR=%.1f%% X-SIR=%.1f%% (>= 50%%); held-out "
                      "cluster-equal cos mean=%.4f min=%.4f (mean >= %.1f)",
                      worst, 100 * drop_sir, 100 * drop_xsir, cos_mean, cos_min, kHeldOutCos)};
}

MockTranslatorConfig translator_config() {
    MockTranslatorConfig t;
    t.noise_rate = 0.1;
    t.reorder_window = 3;
    t.seed = 5;
    return t;
}

MockTranslatorConfig paraphrase_config() {
    MockTranslatorConfig t;
    t.noise_rate = 0.5;
    t.reorder_window = 2;
    t.seed = 6;
    return t;
}

std::vector<TokenSequence> cwra_all(const Bench& bench, const std::vector<TokenSequence>& prompts,
                                    const std::vector<std::size_t>& lengths, const WatermarkEngine* engine,
                                    const Translator& translator, std::uint64_t seed,
                                    std::vector<TokenSequence>* pivots = nullptr) {
    std::vector<TokenSequence> out(prompts.size());
    if (pivots) pivots->assign(prompts.size(), {});
    parallel_for(prompts.size(), bench.jobs, [&](std::size_t i) {
        GenerationOptions options;
        options.max_len = lengths[i];
        options.seed = hash_combine(seed, i);
        auto r = cwra(prompts[i], *bench.lm, engine, translator, AttackSpec{}, options);
        if (!r.ok()) throw std::runtime_error("cwra failed: " + r.failure->message);
        out[i] = std::move(r.final_response);
        if (pivots) (*pivots)[i] = std::move(r.pivot_response);
    });
    return out;
}

Outcome attack_ordering(const Bench& bench) {
    const std::size_t n = 200;
    const std::size_t len = 40;
    KgwEngine engine(KgwConfig{}, bench.vocab->size());
    MockDictionaryTranslator translator(bench.vocab, bench.clustering, translator_config());
    MockParaphraser paraphraser(bench.vocab, bench.clustering, paraphrase_config());
    const auto wm_prompts = bench.prompts(n, 401);
    const auto clean_prompts = bench.prompts(n, 402);
    const auto wm = bench.generate_all(wm_prompts, constant(n, len), &engine, 403);
    const auto clean = bench.generate_all(clean_prompts, constant(n, len), nullptr, 404);

    auto paraphrased = [&](const std::vector<TokenSequence>& texts) {
        std::vector<TokenSequence> out;
        for (const auto& t : texts) out.push_back(paraphrase_attack(t, paraphraser));
        return out;
    };
    const double auc_none = auc_of(bench.score_all(engine, wm), bench.score_all(engine, clean));
    const double auc_para =
        auc_of(bench.score_all(engine, paraphrased(wm)), bench.score_all(engine, paraphrased(clean)));
    const auto wm_cwra = cwra_all(bench, wm_prompts, constant(n, len), &engine, translator, 405);
    const auto clean_cwra = cwra_all(bench, clean_prompts, constant(n, len), nullptr, translator, 406);
    const double auc_cwra = auc_of(bench.score_all(engine, wm_cwra), bench.score_all(engine, clean_cwra));
    const bool pass = auc_none > auc_para && auc_para > auc_cwra && auc_cwra <= kCwraMaxAuc;
    return {pass, fmt("KGW AUC none=%.4f > paraphrase=%.4f > CWRA=%.4f (CWRA <= %.2f), n=%zu/condition, %zu tokens",
                      auc_none, auc_para, auc_cwra, kCwraMaxAuc, n, len)};
}

struct DefenseStats {
    double auc = 0.0;
    double pcc = 0.0;
    double re = 0.0;
};

DefenseStats defense_stats(const Bench& bench, const SirEngine& engine, const Translator& translator) {
    const std::size_t n = 200;
    const auto lengths = spread(n, 20, 270);
    const auto wm_prompts = bench.prompts(n, 501);
    const auto clean_prompts = bench.prompts(n, 502);
    std::vector<TokenSequence> pivots;
    const auto wm = cwra_all(bench, wm_prompts, lengths, &engine, translator, 503, &pivots);
    const auto clean = cwra_all(bench, clean_prompts, lengths, nullptr, translator, 504);
    DefenseStats stats;
    const auto wm_scores = bench.score_all(engine, wm);
    stats.auc = auc_of(wm_scores, bench.score_all(engine, clean));
    const auto pivot_scores = bench.score_all(engine, pivots);
    StrengthSeries series;
    for (std::size_t i = 0; i < n; ++i) {
        series.records.push_back({std::to_string(i), pivots[i].size(), pivot_scores[i], wm_scores[i]});
    }
    stats.pcc = pcc(series);
    stats.re = relative_error(series);
    return stats;
}

Outcome defense_ordering(const Bench& bench) {
    MockDictionaryTranslator translator(bench.vocab, bench.clustering, translator_config());
    SirEngine sir({}, bench.embedder, bench.sir_model);
    SirEngine xsir({}, bench.embedder, bench.xsir_model, bench.clustering);
    const auto s = defense_stats(bench, sir, translator);
    const auto x = defense_stats(bench, xsir, translator);
    const bool pass = x.auc - s.auc >= kDefenseGap && x.pcc > s.pcc && x.re < s.re;
    return {pass, fmt("CWRA (noise 0.1): AUC X-SIR=%.4f SIR=%.4f (gap %.4f >= %.1f); PCC X-SIR=%.4f > SIR=%.4f; "
                      "RE X-SIR=%.2f%% < SIR=%.2f%%",
                      x.auc, s.auc, x.auc - s.auc, kDefenseGap, x.pcc, s.pcc, x.re, s.re)};
}

Outcome metrics_correctness(const Bench&) {
    CounterRng rng(0x3e7);
    // PCC affine invariance.
    std::vector<double> a(500), b(500), b2(500);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform();
        b[i] = a[i] + 0.5 * rng.uniform();
        b2[i] = 3.5 * b[i] - 2.0;
    }
    const double pcc_gap = std::abs(pearson(a, b) - pearson(a, b2));

    // RE against a direct re-implementation.
    StrengthSeries series;
    for (int i = 0; i < 400; ++i) {
        const std::size_t len = 1 + rng.below(300);
        const double s = std::sqrt(len) + rng.uniform();
        series.records.push_back({std::to_string(i), len, s, s * (0.5 + rng.uniform())});
    }
    std::vector<double> sb(13, 0.0), sa(13, 0.0), cnt(13, 0.0);
    for (const auto& r : series.records) {
        sb[r.length / 25] += r.before;
        sa[r.length / 25] += r.after;
        cnt[r.length / 25] += 1;
    }
    std::vector<double> mb, ma;
    for (std::size_t k = 0; k < cnt.size(); ++k) {
        if (cnt[k] > 0) {
            mb.push_back(sb[k] / cnt[k]);
            ma.push_back(sa[k] / cnt[k]);
        }
    }
    double lo = 1e300, hi = -1e300;
    for (std::size_t k = 0; k < mb.size(); ++k) {
        lo = std::min({lo, mb[k], ma[k]});
        hi = std::max({hi, mb[k], ma[k]});
    }
    double total = 0.0;
    int used = 0;
    for (std::size_t k = 0; k < mb.size(); ++k) {
        const double s = (mb[k] - lo) / (hi - lo);
        const double h = (ma[k] - lo) / (hi - lo);
        if (s < 0.05) continue;
        total += std::abs(h - s) / s;
        ++used;
    }
    const double re_gap = std::abs(relative_error(series) - 100.0 * total / used);

    // Threshold sweep against rank statistic, with ties.
    std::vector<DetectionRecord> records;
    for (int i = 0; i < 2000; ++i) {
        records.push_back({std::floor(rng.uniform() * 50) + (i % 3 == 0 ? 5 : 0),
                           i % 3 == 0 ? Label::Watermarked : Label::Clean});
    }
    const double auc_gap = std::abs(roc(records).auc - auc_rank_statistic(records));

    // Uninformative scores: TPR at FPR 0.1 sits near 0.1.
    std::vector<DetectionRecord> noise;
    for (int i = 0; i < 10000; ++i) noise.push_back({rng.uniform(), i % 2 ? Label::Watermarked : Label::Clean});
    const double tpr = tpr_at_fpr(roc(noise), 0.1);

    const bool pass = pcc_gap <= kMetricTol && re_gap <= kMetricTol && auc_gap <= kMetricTol && tpr >= 0.07 &&
                      tpr <= 0.13;
    return {pass, fmt("PCC affine gap=%.1e; RE oracle gap=%.1e; AUC sweep-vs-rank gap=%.1e (all <= 1e-9); "
                      "TPR@FPR0.1 random=%.4f (in [0.07, 0.13])",
                      pcc_gap, re_gap, auc_gap, tpr)};
}

struct Trend {
    double spearman = 0.0;
    std::size_t bins = 0;
    bool attacked_lower = true;
};

Trend length_trend(const Bench& bench, const WatermarkEngine& engine, const Translator& translator,
                   std::uint64_t seed) {
    // Mean-bias scores gain strength only while the early, prompt-conditioned
    // positions matter, so lengths stay short; KGW grows at any length.
    const std::size_t n = 600;
    const auto prompts = bench.prompts(n, seed);
    const auto texts = bench.generate_all(prompts, spread(n, 5, 130), &engine, seed + 1);
    std::vector<TokenSequence> attacked(n);
    parallel_for(n, bench.jobs, [&](std::size_t i) { attacked[i] = retranslation_attack(texts[i], translator, "zh", "en"); });
    const auto before = bench.score_all(engine, texts);
    const auto after = bench.score_all(engine, attacked);
    StrengthSeries series;
    for (std::size_t i = 0; i < n; ++i) series.records.push_back({std::to_string(i), texts[i].size(), before[i], after[i]});
    const auto bins = strength_vs_length_report(series, 25);
    Trend t;
    t.bins = bins.size();
    std::vector<double> idx, means;
    for (const auto& b : bins) {
        idx.push_back(b.lower);
        means.push_back(b.mean_before);
        if (!(b.mean_after < b.mean_before)) t.attacked_lower = false;
    }
    t.spearman = spearman(idx, means);
    return t;
}

Outcome strength_length_trend(const Bench& bench) {
    MockDictionaryTranslator translator(bench.vocab, bench.clustering, translator_config());
    KgwEngine kgw(KgwConfig{}, bench.vocab->size());
    SirEngine sir({}, bench.embedder, bench.sir_model);
    const auto k = length_trend(bench, kgw, translator, 601);
    const auto s = length_trend(bench, sir, translator, 611);
    const bool pass = k.bins >= kMinBins && s.bins >= kMinBins && k.spearman >= kSpearmanMin &&
                      s.spearman >= kSpearmanMin && k.attacked_lower && s.attacked_lower;
    return {pass, fmt("KGW: %zu bins, Spearman=%.3f, attacked lower in every bin=%s; SIR: %zu bins, Spearman=%.3f, "
                      "attacked lower in every bin=%s (>= %zu bins, Spearman >= %.1f)",
                      k.bins, k.spearman, k.attacked_lower ? "yes" : "no", s.bins, s.spearman,
                      s.attacked_lower ? "yes" : "no", kMinBins, kSpearmanMin)};
}

// ---------------------------------------------------------------------------

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

// Runs the whole CLI pipeline into `dir`, returning false if any step fails.
bool cli_pipeline(const fs::path& cli, const fs::path& dir) {
    const std::string x = cli.string();
    const std::string f = (dir / "fixture").string();
    const std::string cfg = " --config " + f + "/config.json";
    const std::vector<std::string> steps = {
        x + " make-fixture --seed 9 --out " + f + " --prompts 12",
        x + " cluster" + cfg + " --out " + f,
        x + " train-sir" + cfg + " --out " + f + " --seed 9 --variant XSIR",
        x + " generate" + cfg + " --out " + (dir / "wm").string() + " --seed 9 --engine XSIR --jobs 2",
        x + " generate" + cfg + " --out " + (dir / "clean").string() + " --seed 9 --engine none",
        x + " attack" + cfg + " --out " + (dir / "wm").string() + " --seed 9 --kind CWRA --engine XSIR --input " +
            (dir / "wm" / "corpus.jsonl").string(),
        x + " attack" + cfg + " --out " + (dir / "clean").string() + " --seed 9 --kind CWRA --engine none --input " +
            (dir / "clean" / "corpus.jsonl").string(),
        x + " detect" + cfg + " --out " + (dir / "wm").string() + " --engine XSIR --field attacked_response --input " +
            (dir / "wm" / "attacked.jsonl").string(),
        x + " detect" + cfg + " --out " + (dir / "clean").string() +
            " --engine XSIR --field attacked_response --input " + (dir / "clean" / "attacked.jsonl").string(),
        x + " evaluate" + cfg + " --out " + (dir / "eval").string() + " --watermarked " +
            (dir / "wm" / "detections.jsonl").string() + " --clean " + (dir / "clean" / "detections.jsonl").string(),
    };
    for (const auto& s : steps) {
        if (run(s) != 0) {
            std::fprintf(stderr, "pipeline step failed: %s\n", s.c_str());
            return false;
        }
    }
    return true;
}

std::vector<fs::path> outputs_under(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
    }
    std::sort(out.begin(), out.end());
    return out;
}

Outcome reproducibility(const fs::path& cli) {
    const fs::path root = fs::temp_directory_path() / fmt("xwm-acceptance-%d", static_cast<int>(::getpid()));
    fs::remove_all(root);
    const fs::path a = root / "a";
    const fs::path b = root / "b";
    if (!cli_pipeline(cli, a) || !cli_pipeline(cli, b)) return {false, "CLI pipeline failed"};

    // Two independent runs must agree except for the fixture directory path
    // itself, which only appears inside manifests.
    std::size_t compared = 0;
    std::size_t identical = 0;
    std::vector<std::string> differing;
    for (const auto& rel : outputs_under(a)) {
        if (rel.extension() == ".json" && rel.filename().string().find("manifest") != std::string::npos) continue;
        ++compared;
        if (read_file(a / rel) == read_file(b / rel)) {
            ++identical;
        } else {
            differing.push_back(rel.string());
        }
    }

    // Each manifest reruns to byte-identical outputs in its own directory.
    std::size_t reruns = 0;
    std::size_t rerun_ok = 0;
    for (const auto& rel : outputs_under(a)) {
        const auto name = rel.filename().string();
        const auto pos = name.find(".manifest.json");
        if (pos == std::string::npos) continue;
        const auto manifest = a / rel;
        ++reruns;
        const fs::path redo = root / "rerun" / std::to_string(reruns);
        const auto snapshot = outputs_under(manifest.parent_path());
        if (run(cli.string() + " rerun " + manifest.string() + " --out " + redo.string()) != 0) continue;
        bool same = true;
        for (const auto& produced : outputs_under(redo)) {
            if (read_file(redo / produced) != read_file(manifest.parent_path() / produced)) same = false;
        }
        if (same && !outputs_under(redo).empty()) ++rerun_ok;
    }
    fs::remove_all(root);
    const bool pass = compared > 0 && identical == compared && reruns > 0 && rerun_ok == reruns;
    std::string detail = fmt("%zu/%zu outputs byte-identical across runs; %zu/%zu manifests rerun byte-identically",
                             identical, compared, rerun_ok, reruns);
    for (const auto& d : differing) detail += " [differs: " + d + "]";
    return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-xwm-cli>\n");
        return 2;
    }
    const fs::path cli = argv[1];
    const auto start = std::chrono::steady_clock::now();
    const Bench bench;

    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"C1 KGW detection power and null calibration", [&] { return kgw_detection_power(bench); }},
        {"C2 UW unbiasedness", [&] { return uw_unbiasedness(bench); }},
        {"C3 UW detection", [&] { return uw_detection(bench); }},
        {"C4 X-SIR cluster invariant", [&] { return xsir_cluster_invariant(bench); }},
        {"C5 connected components oracle", [&] { return components_oracle(bench); }},
        {"C6 SIR trainer", [&] { return sir_trainer(bench); }},
        {"C7 attack ordering", [&] { return attack_ordering(bench); }},
        {"C8 defense ordering", [&] { return defense_ordering(bench); }},
        {"C9 metrics correctness", [&] { return metrics_correctness(bench); }},
        {"C10 strength-length trend", [&] { return strength_length_trend(bench); }},
        {"C11 reproducibility", [&] { return reproducibility(cli); }},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(criteria.size()) - failures, criteria.size(),
                secs);
    return failures == 0 ? 0 : 1;
}
