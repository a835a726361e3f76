#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "xwm/attacks.hpp"
#include "xwm/corpus.hpp"
#include "xwm/metrics.hpp"
#include "xwm/world.hpp"

using namespace xwm;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    SyntheticWorld world = make_world(WorldConfig{});
    std::shared_ptr<const Vocabulary> vocab = std::make_shared<const Vocabulary>(world.vocab);
    std::shared_ptr<const SemanticClustering> clustering =
        std::make_shared<const SemanticClustering>(build_clustering(*vocab, world.dictionary));
    ToyLm lm{vocab, ToyLmConfig{}};

    TokenId id(const char* t) const { return *vocab->find(t); }
};

// Fails on the way back to the original language.
struct OneWayTranslator final : Translator {
    TokenSequence translate(const TokenSequence& text, std::string_view, std::string_view to) const override {
        if (to == "en") throw std::runtime_error("service down");
        return {text.ids, std::string(to)};
    }
};

}  // namespace

TEST_CASE("identity translator keeps tokens") {
    IdentityTranslator t;
    const TokenSequence text{{5, 6, 7}, "en"};
    const auto out = retranslation_attack(text, t, "zh", "en");
    CHECK(out.ids == text.ids);
    CHECK(out.language == "en");
}

TEST_CASE("mock translator maps through clusters") {
    Fixture f;
    MockTranslatorConfig c;
    c.noise_rate = 0.0;
    c.reorder_window = 1;
    MockDictionaryTranslator t(f.vocab, f.clustering, c);
    const TokenSequence en{{f.id("I"), f.id("like"), f.id("movies")}, "en"};
    const auto zh = t.translate(en, "en", "zh");
    CHECK(zh.ids == std::vector<TokenId>{f.id("我"), f.id("喜欢"), f.id("电影")});
    CHECK(zh.language == "zh");
    CHECK(t.translate(zh, "zh", "en").ids == en.ids);

    // en-only tokens have no target member and pass through
    const TokenSequence only{{f.id("en_only000")}, "en"};
    CHECK(t.translate(only, "en", "zh").ids == only.ids);

    c.reorder_window = 3;
    c.noise_rate = 0.5;
    MockDictionaryTranslator noisy(f.vocab, f.clustering, c);
    CHECK(noisy.translate(en, "en", "zh") == noisy.translate(en, "en", "zh"));

    MockTranslatorConfig bad;
    bad.noise_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("local reorder permutes within blocks") {
    std::vector<TokenId> ids = {0, 1, 2, 3, 4, 5, 6};
    CounterRng rng(3);
    local_reorder(ids, 3, rng);
    std::vector<TokenId> head(ids.begin(), ids.begin() + 3), mid(ids.begin() + 3, ids.begin() + 6);
    std::sort(head.begin(), head.end());
    std::sort(mid.begin(), mid.end());
    CHECK(head == std::vector<TokenId>{0, 1, 2});
    CHECK(mid == std::vector<TokenId>{3, 4, 5});
    CHECK(ids[6] == 6);
}

TEST_CASE("paraphraser stays in language and cluster") {
    Fixture f;
    MockTranslatorConfig c;
    c.noise_rate = 1.0;
    c.reorder_window = 1;
    MockParaphraser p(f.vocab, f.clustering, c);
    GenerationOptions o;
    o.max_len = 60;
    o.seed = 2;
    const auto text = generate(f.lm, TokenSequence{{kBosId}, "en"}, o);
    const auto out = p.paraphrase(text);
    REQUIRE(out.size() == text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        CHECK(f.clustering->cluster_index(out.ids[i]) == f.clustering->cluster_index(text.ids[i]));
        CHECK(f.vocab->language(out.ids[i]) == f.vocab->language(text.ids[i]));
    }
}

TEST_CASE("attack kinds parse and validate") {
    CHECK(parse_attack_kind("CWRA") == AttackKind::Cwra);
    CHECK(parse_attack_kind("RE_TRANSLATION") == AttackKind::ReTranslation);
    CHECK_THROWS_AS(parse_attack_kind("SUMMARIZE"), std::invalid_argument);
    AttackSpec same;
    same.pivot_lang = "en";
    CHECK_THROWS_AS(same.validate(), std::invalid_argument);
    same.kind = AttackKind::Paraphrase;
    CHECK_NOTHROW(same.validate());
}

TEST_CASE("cwra records the failing stage and keeps earlier outputs") {
    Fixture f;
    OneWayTranslator t;
    GenerationOptions o;
    o.max_len = 10;
    const auto r = cwra(TokenSequence{{kBosId, f.id("I")}, "en"}, f.lm, nullptr, t, AttackSpec{}, o);
    REQUIRE_FALSE(r.ok());
    CHECK(r.failure->stage == AttackStage::TranslateBack);
    CHECK(r.failure->message.find("service down") != std::string::npos);
    CHECK(r.pivot_prompt.language == "zh");
    CHECK(r.pivot_response.size() == 10);
    CHECK(r.final_response.empty());

    CHECK_THROWS_AS(retranslation_attack(r.pivot_response, t, "zh", "en"), StageError);
}

TEST_CASE("external translator talks JSON over loopback and retries server errors") {
    httplib::Server server;
    std::atomic<int> calls{0};
    server.Post("/translate", [&](const httplib::Request& req, httplib::Response& res) {
        if (calls++ == 0) {
            res.status = 503;
            return;
        }
        auto body = nlohmann::json::parse(req.body);
        auto ids = body["text"].get<std::vector<TokenId>>();
        std::reverse(ids.begin(), ids.end());
        res.set_content(nlohmann::json{{"text", ids}}.dump(), "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ExternalTranslatorConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/translate";
    c.timeout = std::chrono::milliseconds(2000);
    ExternalTranslatorClient client(c);
    const auto out = client.translate(TokenSequence{{1, 2, 3}, "en"}, "en", "zh");
    CHECK(out.ids == std::vector<TokenId>{3, 2, 1});
    CHECK(out.language == "zh");
    CHECK(calls == 2);

    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/broken";
    ExternalTranslatorClient broken(c);
    CHECK_THROWS_WITH_AS(broken.translate(TokenSequence{{1}, "en"}, "en", "zh"), doctest::Contains("400"),
                         std::runtime_error);

    server.stop();
    th.join();

    c.endpoint = "localhost:1/translate";
    CHECK_THROWS_AS(ExternalTranslatorClient{c}, std::invalid_argument);
}

TEST_CASE("pearson and spearman on hand examples") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> y = {2, 4, 5, 4, 5};
    // sxy = 6, sxx = 10, syy = 6
    CHECK(pearson(x, y) == doctest::Approx(6.0 / std::sqrt(60.0)).epsilon(1e-12));
    const std::vector<double> z = {1, 8, 27, 64, 125};
    CHECK(spearman(x, z) == doctest::Approx(1.0));
    CHECK_THROWS_AS(pearson(x, std::vector<double>(5, 1.0)), std::invalid_argument);
}

TEST_CASE("relative error by hand") {
    // bin means S = [1, 3, 5], S-hat = [0.5, 1.5, 4]; joint range [0.5, 5]
    StrengthSeries s;
    s.records = {{"a", 10, 1.0, 0.5}, {"b", 30, 2.0, 1.0}, {"c", 35, 4.0, 2.0}, {"d", 60, 5.0, 4.0}};
    const double expected = 100.0 * (1.0 + 0.6 + (2.0 / 9.0)) / 3.0;
    CHECK(relative_error(s) == doctest::Approx(expected).epsilon(1e-12));

    // separate normalisation maps both series onto [0, 1]; S's first bin is 0 and skipped
    RelativeErrorConfig sep;
    sep.normalization = Normalization::Separate;
    const double s1 = 0.5, h1 = 1.0 / 3.5;
    CHECK(relative_error(s, sep) == doctest::Approx(100.0 * (std::abs(h1 - s1) / s1 + 0.0) / 2.0).epsilon(1e-12));

    const auto bins = strength_vs_length_report(s, 25);
    REQUIRE(bins.size() == 3);
    CHECK(bins[1].count == 2);
    CHECK(bins[1].mean_before == 3.0);
}

TEST_CASE("roc and auc on a small table") {
    std::vector<DetectionRecord> r = {{3.0, Label::Watermarked}, {2.0, Label::Watermarked},
                                      {0.5, Label::Watermarked}, {1.0, Label::Clean},
                                      {0.0, Label::Clean},       {-1.0, Label::Clean}};
    const auto c = roc(r);
    CHECK(c.auc == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(auc_rank_statistic(r) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(tpr_at_fpr(c, 0.1) == doctest::Approx(2.0 / 3.0));
    CHECK(tpr_at_fpr(c, 0.34) == 1.0);
    CHECK(c.fpr.back() == 1.0);
    CHECK(c.tpr.back() == 1.0);

    // a tie between labels counts one half
    std::vector<DetectionRecord> tie = {{1.0, Label::Watermarked}, {1.0, Label::Clean}};
    CHECK(roc(tie).auc == doctest::Approx(0.5));
    CHECK_THROWS_AS(roc(std::vector<DetectionRecord>{{1.0, Label::Clean}}), std::invalid_argument);

    std::ostringstream csv;
    const std::vector<std::string> pre = {"seed=1"};
    write_roc_csv(csv, c, pre);
    CHECK(csv.str().rfind("# seed=1\nthreshold,fpr,tpr\n", 0) == 0);
}

TEST_CASE("corpus and score files round-trip") {
    const auto dir = fs::temp_directory_path() / "xwm-unit-corpus";
    fs::create_directories(dir);
    CorpusRecord r;
    r.id = "p0001";
    r.prompt = {{0, 4, 5}, "en"};
    r.response = {{6, 7}, "en"};
    r.pivot_response = TokenSequence{{8}, "zh"};
    r.attacked_response = TokenSequence{{6}, "en"};
    r.attack = "CWRA";
    r.config_hash = "abc";
    r.seed = 9;
    CorpusRecord plain;
    plain.id = "p0002";
    plain.prompt = {{0}, "zh"};
    plain.response = {{1}, "zh"};
    plain.failed_stage = "translate_back";
    write_corpus(dir / "c.jsonl", {r, plain});
    const auto back = read_corpus(dir / "c.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].prompt == r.prompt);
    CHECK(back[0].pivot_response == r.pivot_response);
    CHECK_FALSE(back[0].pivot_prompt.has_value());
    CHECK(back[0].attack == r.attack);
    CHECK(back[0].seed == 9);
    CHECK(back[1].failed_stage == plain.failed_stage);

    ScoreRecord s{"p0001", {1.25, Scheme::XsirMeanBias, 40}, "abc", 9};
    write_scores(dir / "s.jsonl", {s});
    const auto sb = read_scores(dir / "s.jsonl");
    REQUIRE(sb.size() == 1);
    CHECK(sb[0].score.value == 1.25);
    CHECK(sb[0].score.scheme == Scheme::XsirMeanBias);
    CHECK(sb[0].score.token_count == 40);

    std::ofstream(dir / "bad.jsonl") << "{\"id\": \"x\"}\n";
    CHECK_THROWS_WITH_AS(read_corpus(dir / "bad.jsonl"), doctest::Contains(":1"), std::runtime_error);
}
