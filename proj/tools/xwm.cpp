// xwm: generate, attack, detect, cluster, train-sir, evaluate.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xwm/attacks.hpp"
#include "xwm/clustering.hpp"
#include "xwm/config.hpp"
#include "xwm/corpus.hpp"
#include "xwm/embedding.hpp"
#include "xwm/hashing.hpp"
#include "xwm/metrics.hpp"
#include "xwm/parallel.hpp"
#include "xwm/sir_model.hpp"
#include "xwm/world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xwm;

namespace {

constexpr const char* kToolVersion = "xwm 1.0";

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Config keys holding file paths, resolved against the config's directory.
const std::vector<json::json_pointer>& path_keys() {
    static const std::vector<json::json_pointer> keys = {
        json::json_pointer("/vocab"),
        json::json_pointer("/engine/sir/model"),
        json::json_pointer("/engine/sir/clustering"),
        json::json_pointer("/generate/prompts"),
        json::json_pointer("/attack/input"),
        json::json_pointer("/attack/translator/clustering"),
        json::json_pointer("/detect/input"),
        json::json_pointer("/cluster/dictionary"),
        json::json_pointer("/train_sir/clustering"),
        json::json_pointer("/evaluate/before"),
        json::json_pointer("/evaluate/after"),
        json::json_pointer("/evaluate/watermarked"),
        json::json_pointer("/evaluate/clean"),
    };
    return keys;
}

// Sections of the config each command reads; only these enter its hash.
const std::map<std::string, std::vector<std::string>>& command_sections() {
    static const std::map<std::string, std::vector<std::string>> sections = {
        {"generate", {"vocab", "lm", "engine", "generate"}},
        {"attack", {"vocab", "lm", "engine", "generate", "attack"}},
        {"detect", {"vocab", "lm", "engine", "detect"}},
        {"cluster", {"vocab", "cluster"}},
        {"train-sir", {"vocab", "lm", "train_sir"}},
        {"evaluate", {"evaluate"}},
        {"make-fixture", {"fixture"}},
    };
    return sections;
}

struct Run {
    std::string command;
    json config;  // the command's sections, paths absolute
    std::uint64_t seed = 0;
    std::string hash;
    fs::path out;
    std::size_t jobs = 1;

    std::vector<std::string> preamble() const { return {"config_hash=" + hash, "seed=" + std::to_string(seed)}; }
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return "fnv1a64:" + to_hex(fnv1a64(buf.str()));
}

// Hash of the command's config with every path replaced by the digest of the
// file it names, so the hash follows content rather than location.
std::string content_hash(const std::string& command, const json& config) {
    json keyed = config;
    for (const auto& key : path_keys()) {
        if (!keyed.contains(key)) continue;
        const fs::path p = keyed[key].get<std::string>();
        keyed[key] = fs::exists(p) ? file_digest(p) : "missing";
    }
    return config_hash(json{{"command", command}, {"config", keyed}});
}

template <typename T>
T get_or(const json& doc, const char* pointer, T fallback) {
    const json::json_pointer ptr(pointer);
    return doc.contains(ptr) ? doc[ptr].get<T>() : fallback;
}

std::string require_string(const json& doc, const char* pointer, const char* flag_hint) {
    const json::json_pointer ptr(pointer);
    if (!doc.contains(ptr)) {
        throw UsageError(std::string("missing config key ") + pointer + (flag_hint ? std::string(" (or ") + flag_hint + ")" : ""));
    }
    return doc[ptr].get<std::string>();
}

fs::path require_file(const json& doc, const char* pointer, const char* flag_hint = nullptr) {
    const fs::path p = require_string(doc, pointer, flag_hint);
    if (!fs::exists(p)) throw UsageError(std::string(pointer) + ": file " + p.string() + " does not exist");
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_manifest(const Run& run) {
    const json manifest = {{"tool", kToolVersion},
                           {"command", run.command},
                           {"seed", run.seed},
                           {"config_hash", run.hash},
                           {"config", run.config}};
    write_text(run.out / (run.command + ".manifest.json"), manifest.dump(2) + "\n");
}

// Adds provenance keys to a JSON artifact written by the library.
void stamp_json(const fs::path& path, const Run& run) {
    std::ifstream in(path);
    json doc = json::parse(in);
    in.close();
    doc["config_hash"] = run.hash;
    doc["seed"] = run.seed;
    write_text(path, doc.dump() + "\n");
}

std::shared_ptr<const Vocabulary> load_vocab(const Run& run) {
    return std::make_shared<const Vocabulary>(Vocabulary::load(require_file(run.config, "/vocab")));
}

std::shared_ptr<const ToyLm> load_lm(const Run& run, std::shared_ptr<const Vocabulary> vocab) {
    return std::make_shared<const ToyLm>(std::move(vocab), parse_lm_config(get_or(run.config, "/lm", json::object())));
}

EngineSpec engine_spec(const Run& run) {
    const auto spec = parse_engine_spec(get_or(run.config, "/engine", json::object()));
    if (spec.scheme == "SIR" || spec.scheme == "XSIR") {
        require_file(run.config, "/engine/sir/model");
        require_file(run.config, "/engine/sir/clustering");
    }
    return spec;
}

void sort_by_id(auto& records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

// ---------------------------------------------------------------------------
// Commands. Each runs in two phases: `check` validates the config and may
// throw UsageError; the returned action does the work.

using Action = std::function<void()>;

Action cmd_generate(const Run& run) {
    const auto prompts_path = require_file(run.config, "/generate/prompts", "--prompts");
    const auto max_len = get_or<std::size_t>(run.config, "/generate/max_len", 200);
    if (max_len == 0) throw UsageError("generate.max_len must be positive");
    const auto spec = engine_spec(run);
    auto vocab = load_vocab(run);
    return [=, &run] {
        auto lm = load_lm(run, vocab);
        const auto engine = build_engine(spec, *vocab, lm);
        auto records = read_prompts(prompts_path);
        sort_by_id(records);
        const std::uint64_t stage = derive_seed(run.seed, "generate");
        parallel_for(records.size(), run.jobs, [&](std::size_t i) {
            auto& r = records[i];
            validate(r.prompt, *vocab);
            GenerationOptions options;
            options.max_len = max_len;
            options.seed = derive_seed(stage, r.id);
            r.response = generate(*lm, r.prompt, options, engine.get());
            r.config_hash = run.hash;
            r.seed = options.seed;
        });
        write_corpus(run.out / "corpus.jsonl", records);
        std::fprintf(stderr, "generate: %zu responses (engine %s)\n", records.size(), spec.scheme.c_str());
    };
}

struct AttackTools {
    std::unique_ptr<Translator> translator;
    std::unique_ptr<Paraphraser> paraphraser;
};

MockTranslatorConfig mock_config(const json& doc, const char* section, std::uint64_t seed, double noise,
                                 std::size_t window) {
    MockTranslatorConfig c;
    c.noise_rate = get_or(doc, (std::string(section) + "/noise_rate").c_str(), noise);
    c.reorder_window = get_or(doc, (std::string(section) + "/reorder_window").c_str(), window);
    c.seed = seed;
    c.validate();
    return c;
}

Action cmd_attack(const Run& run) {
    const auto input = require_file(run.config, "/attack/input", "--input");
    AttackSpec spec;
    try {
        spec.kind = parse_attack_kind(get_or<std::string>(run.config, "/attack/kind", "CWRA"));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    spec.pivot_lang = get_or<std::string>(run.config, "/attack/pivot_lang", spec.pivot_lang);
    spec.original_lang = get_or<std::string>(run.config, "/attack/original_lang", spec.original_lang);
    spec.validate();
    const auto translator_kind = get_or<std::string>(run.config, "/attack/translator/kind", "mock");
    if (translator_kind != "mock" && translator_kind != "identity" && translator_kind != "external") {
        throw UsageError("unknown translator kind '" + translator_kind + "' (expected mock, identity or external)");
    }
    const auto translator_seed = derive_seed(run.seed, "attack/translator");
    const auto tcfg = mock_config(run.config, "/attack/translator", translator_seed, 0.1, 3);
    const auto pcfg = mock_config(run.config, "/attack/paraphraser", derive_seed(run.seed, "attack/paraphraser"), 0.5, 2);
    const bool needs_clustering = translator_kind == "mock" || spec.kind == AttackKind::Paraphrase;
    const fs::path clustering_path =
        needs_clustering ? require_file(run.config, "/attack/translator/clustering") : fs::path{};
    ExternalTranslatorConfig ext;
    if (translator_kind == "external") {
        ext.endpoint = require_string(run.config, "/attack/translator/endpoint", "--endpoint");
        ext.timeout = std::chrono::milliseconds(get_or<long>(run.config, "/attack/translator/timeout_ms", 10000));
        ext.retries = get_or(run.config, "/attack/translator/retries", 2);
    }
    const auto max_len = get_or<std::size_t>(run.config, "/generate/max_len", 200);
    const auto engine = spec.kind == AttackKind::Cwra ? engine_spec(run) : EngineSpec{};
    auto vocab = load_vocab(run);

    return [=, &run] {
        std::shared_ptr<const SemanticClustering> clustering;
        if (needs_clustering) {
            clustering = std::make_shared<const SemanticClustering>(SemanticClustering::load(clustering_path));
        }
        AttackTools tools;
        if (translator_kind == "mock") {
            tools.translator = std::make_unique<MockDictionaryTranslator>(vocab, clustering, tcfg);
        } else if (translator_kind == "identity") {
            tools.translator = std::make_unique<IdentityTranslator>();
        } else {
            tools.translator = std::make_unique<ExternalTranslatorClient>(ext);
        }
        if (spec.kind == AttackKind::Paraphrase) tools.paraphraser = std::make_unique<MockParaphraser>(vocab, clustering, pcfg);

        auto lm = load_lm(run, vocab);
        const auto wm = spec.kind == AttackKind::Cwra ? build_engine(engine, *vocab, lm) : nullptr;
        auto records = read_corpus(input);
        sort_by_id(records);
        const std::uint64_t stage = derive_seed(run.seed, "attack/generate");
        std::vector<std::string> failures(records.size());
        parallel_for(records.size(), run.jobs, [&](std::size_t i) {
            auto& r = records[i];
            r.attack = std::string(to_string(spec.kind));
            r.config_hash = run.hash;
            r.seed = derive_seed(stage, r.id);
            try {
                if (spec.kind == AttackKind::Cwra) {
                    GenerationOptions options;
                    options.max_len = max_len;
                    options.seed = r.seed;
                    auto result = cwra(r.prompt, *lm, wm.get(), *tools.translator, spec, options);
                    r.pivot_prompt = result.pivot_prompt;
                    if (!result.pivot_response.empty()) r.pivot_response = result.pivot_response;
                    if (result.ok()) {
                        r.attacked_response = result.final_response;
                    } else {
                        r.failed_stage = std::string(to_string(result.failure->stage));
                        failures[i] = result.failure->message;
                    }
                } else if (spec.kind == AttackKind::ReTranslation) {
                    TokenSequence pivot;
                    r.attacked_response = retranslation_attack(r.response, *tools.translator, spec.pivot_lang,
                                                               spec.original_lang, &pivot);
                    r.pivot_response = pivot;
                } else {
                    r.attacked_response = paraphrase_attack(r.response, *tools.paraphraser);
                }
            } catch (const StageError& e) {
                r.failed_stage = std::string(to_string(e.stage()));
                failures[i] = e.what();
            }
        });
        std::size_t failed = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (failures[i].empty()) continue;
            ++failed;
            std::fprintf(stderr, "attack: %s failed at %s: %s\n", records[i].id.c_str(),
                         records[i].failed_stage->c_str(), failures[i].c_str());
        }
        write_corpus(run.out / "attacked.jsonl", records);
        std::fprintf(stderr, "attack: %s over %zu texts, %zu failed\n", std::string(to_string(spec.kind)).c_str(),
                     records.size(), failed);
        if (!records.empty() && failed == records.size()) throw std::runtime_error("attack: every text failed");
    };
}

Action cmd_detect(const Run& run) {
    const auto input = require_file(run.config, "/detect/input", "--input");
    const auto field = get_or<std::string>(run.config, "/detect/field", "response");
    if (field != "response" && field != "attacked_response" && field != "pivot_response") {
        throw UsageError("detect.field must be response, attacked_response or pivot_response");
    }
    const bool use_context = get_or(run.config, "/detect/use_prompt_context", true);
    const auto spec = engine_spec(run);
    if (spec.scheme == "none") throw UsageError("detect needs an engine scheme other than none");
    auto vocab = load_vocab(run);

    return [=, &run] {
        auto lm = load_lm(run, vocab);
        const auto engine = build_engine(spec, *vocab, lm);
        auto records = read_corpus(input);
        sort_by_id(records);
        std::vector<std::optional<ScoreRecord>> slots(records.size());
        parallel_for(records.size(), run.jobs, [&](std::size_t i) {
            const auto& r = records[i];
            const TokenSequence* text = &r.response;
            const TokenSequence* context = &r.prompt;
            if (field == "attacked_response") {
                if (!r.attacked_response) return;
                text = &*r.attacked_response;
            } else if (field == "pivot_response") {
                if (!r.pivot_response) return;
                text = &*r.pivot_response;
                context = r.pivot_prompt ? &*r.pivot_prompt : nullptr;
            }
            validate(*text, *vocab);
            ScoreRecord s;
            s.id = r.id;
            const std::span<const TokenId> ctx =
                use_context && context ? std::span<const TokenId>(context->ids) : std::span<const TokenId>{};
            s.score = engine->score(*text, ctx);
            s.config_hash = run.hash;
            s.seed = run.seed;
            slots[i] = std::move(s);
        });
        std::vector<ScoreRecord> scores;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i]) {
                scores.push_back(std::move(*slots[i]));
            } else {
                std::fprintf(stderr, "detect: %s has no %s, skipped\n", records[i].id.c_str(), field.c_str());
            }
        }
        write_scores(run.out / "detections.jsonl", scores);
        std::fprintf(stderr, "detect: %zu scores (%s)\n", scores.size(), spec.scheme.c_str());
    };
}

Action cmd_cluster(const Run& run) {
    const auto dict_path = require_file(run.config, "/cluster/dictionary", "--dictionary");
    auto vocab = load_vocab(run);
    return [=, &run] {
        const auto dict = BilingualDictionary::load(dict_path);
        std::size_t skipped = 0;
        const auto clustering = build_clustering(*vocab, dict, &skipped);
        clustering.save(run.out / "clustering.json");
        stamp_json(run.out / "clustering.json", run);
        std::size_t multi = 0;
        for (double s : clustering.cluster_sizes()) multi += s > 1.0;
        std::fprintf(stderr, "cluster: %zu clusters (%zu with several members), %zu dictionary entries skipped\n",
                     clustering.num_clusters(), multi, skipped);
    };
}

Action cmd_train_sir(const Run& run) {
    const auto clustering_path = require_file(run.config, "/train_sir/clustering");
    SirVariant variant;
    try {
        variant = parse_sir_variant(get_or<std::string>(run.config, "/train_sir/variant", "XSIR"));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    ToyEmbeddingConfig emb;
    emb.dim = get_or(run.config, "/train_sir/embedding/dim", emb.dim);
    emb.seed = get_or(run.config, "/train_sir/embedding/seed", emb.seed);
    emb.window = get_or(run.config, "/train_sir/embedding/window", emb.window);
    const auto hidden = get_or(run.config, "/train_sir/hidden", std::vector<std::size_t>{64, 64, 64});
    PairSamplingConfig pairs;
    pairs.count = get_or(run.config, "/train_sir/pairs/count", pairs.count);
    pairs.min_len = get_or(run.config, "/train_sir/pairs/min_len", pairs.min_len);
    pairs.max_len = get_or(run.config, "/train_sir/pairs/max_len", pairs.max_len);
    pairs.translated_share = get_or(run.config, "/train_sir/pairs/translated_share", pairs.translated_share);
    pairs.perturbed_share = get_or(run.config, "/train_sir/pairs/perturbed_share", pairs.perturbed_share);
    pairs.seed = derive_seed(run.seed, "train-sir/pairs");
    TrainingConfig training;
    training.learning_rate = get_or(run.config, "/train_sir/training/learning_rate", training.learning_rate);
    training.lambda1 = get_or(run.config, "/train_sir/training/lambda1", training.lambda1);
    training.lambda2 = get_or(run.config, "/train_sir/training/lambda2", training.lambda2);
    training.epochs = get_or(run.config, "/train_sir/training/epochs", training.epochs);
    training.batch_size = get_or(run.config, "/train_sir/training/batch_size", training.batch_size);
    training.seed = derive_seed(run.seed, "train-sir/shuffle");
    training.validate();
    auto vocab = load_vocab(run);

    return [=, &run] {
        auto lm = load_lm(run, vocab);
        auto clustering = std::make_shared<const SemanticClustering>(SemanticClustering::load(clustering_path));
        if (clustering->vocab_size() != vocab->size()) {
            throw std::runtime_error("clustering does not cover the vocabulary");
        }
        ToyEmbedding embedder(clustering, emb);
        const auto data = make_training_pairs(*lm, *vocab, *clustering, embedder, pairs);
        const std::size_t out_dim = variant == SirVariant::XSir ? clustering->num_clusters() : vocab->size();
        WatermarkModel model(emb.dim, out_dim, hidden);
        model.initialize(derive_seed(run.seed, "train-sir/init"));
        const auto weights = variant == SirVariant::XSir ? clustering->cluster_sizes() : std::vector<double>{};
        auto result = train(std::move(model), training, data, weights);

        SirArtifact artifact{variant, std::move(result.model), emb, to_hex(clustering->checksum())};
        artifact.save(run.out / "sir_model.json");
        stamp_json(run.out / "sir_model.json", run);
        std::ostringstream csv;
        for (const auto& line : run.preamble()) csv << "# " << line << '\n';
        csv << "epoch,loss\n";
        csv.precision(17);
        for (std::size_t e = 0; e < result.loss_curve.size(); ++e) csv << e << ',' << result.loss_curve[e] << '\n';
        write_text(run.out / "loss_curve.csv", csv.str());
        std::fprintf(stderr, "train-sir: %s, %zu pairs, loss %.4f -> %.4f\n", std::string(to_string(variant)).c_str(),
                     data.size(), result.loss_curve.front(), result.loss_curve.back());
    };
}

std::map<std::string, ScoreRecord> index_scores(const fs::path& path) {
    std::map<std::string, ScoreRecord> out;
    for (auto& r : read_scores(path)) {
        const auto id = r.id;
        if (!out.emplace(id, std::move(r)).second) throw std::runtime_error(path.string() + ": duplicate id " + id);
    }
    return out;
}

json nullable(const std::function<double()>& fn, const char* what) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "evaluate: %s undefined: %s\n", what, e.what());
        return nullptr;
    }
}

Action cmd_evaluate(const Run& run) {
    const json& c = run.config;
    const bool paired = c.contains(json::json_pointer("/evaluate/before")) || c.contains(json::json_pointer("/evaluate/after"));
    const bool labelled =
        c.contains(json::json_pointer("/evaluate/watermarked")) || c.contains(json::json_pointer("/evaluate/clean"));
    if (!paired && !labelled) throw UsageError("evaluate needs --before/--after and/or --watermarked/--clean");
    const fs::path before = paired ? require_file(c, "/evaluate/before", "--before") : fs::path{};
    const fs::path after = paired ? require_file(c, "/evaluate/after", "--after") : fs::path{};
    const fs::path wm = labelled ? require_file(c, "/evaluate/watermarked", "--watermarked") : fs::path{};
    const fs::path clean = labelled ? require_file(c, "/evaluate/clean", "--clean") : fs::path{};
    RelativeErrorConfig re;
    re.bin_width = get_or(c, "/evaluate/bin_width", re.bin_width);
    re.epsilon = get_or(c, "/evaluate/epsilon", re.epsilon);
    const auto norm = get_or<std::string>(c, "/evaluate/normalization", "joint");
    if (norm != "joint" && norm != "separate") throw UsageError("evaluate.normalization must be joint or separate");
    re.normalization = norm == "joint" ? Normalization::Joint : Normalization::Separate;
    if (re.bin_width == 0) throw UsageError("evaluate.bin_width must be positive");
    const double fpr = get_or(c, "/evaluate/fpr", 0.1);

    return [=, &run] {
        json metrics = {{"config_hash", run.hash}, {"seed", run.seed}};
        std::vector<LengthBin> bins;
        if (paired) {
            const auto a = index_scores(before);
            const auto b = index_scores(after);
            std::vector<std::string> unpaired;
            for (const auto& [id, r] : a) {
                if (!b.count(id)) unpaired.push_back(id);
            }
            for (const auto& [id, r] : b) {
                if (!a.count(id)) unpaired.push_back(id);
            }
            if (!unpaired.empty()) {
                std::string list;
                for (std::size_t i = 0; i < unpaired.size() && i < 20; ++i) list += (i ? ", " : "") + unpaired[i];
                if (unpaired.size() > 20) list += ", ...";
                throw std::runtime_error("evaluate: " + std::to_string(unpaired.size()) + " unpaired ids: " + list);
            }
            StrengthSeries series;
            for (const auto& [id, r] : a) {
                series.records.push_back({id, std::max<std::size_t>(r.score.token_count, 1), r.score.value,
                                          b.at(id).score.value});
            }
            bins = strength_vs_length_report(series, re.bin_width);
            json table = json::array();
            for (const auto& bin : bins) {
                table.push_back({{"lower", bin.lower},
                                 {"upper", bin.upper},
                                 {"count", bin.count},
                                 {"mean_before", bin.mean_before},
                                 {"mean_after", bin.mean_after}});
            }
            metrics["paired"] = {{"count", series.records.size()},
                                 {"pcc", nullable([&] { return pcc(series); }, "PCC")},
                                 {"relative_error_percent", nullable([&] { return relative_error(series, re); }, "RE")},
                                 {"strength_vs_length", table}};
        }
        if (labelled) {
            std::vector<DetectionRecord> records;
            std::size_t n_wm = 0;
            std::size_t n_clean = 0;
            for (const auto& [id, r] : index_scores(wm)) {
                records.push_back({r.score.value, Label::Watermarked});
                ++n_wm;
            }
            for (const auto& [id, r] : index_scores(clean)) {
                records.push_back({r.score.value, Label::Clean});
                ++n_clean;
            }
            const auto curve = roc(records);
            metrics["detection"] = {{"watermarked", n_wm},
                                    {"clean", n_clean},
                                    {"auc", curve.auc},
                                    {"fpr_target", fpr},
                                    {"tpr_at_fpr", tpr_at_fpr(curve, fpr)}};
            std::ostringstream csv;
            csv.precision(17);
            write_roc_csv(csv, curve, run.preamble());
            write_text(run.out / "roc.csv", csv.str());
        }
        if (paired) {
            std::ostringstream csv;
            csv.precision(17);
            write_length_report_csv(csv, bins, run.preamble());
            write_text(run.out / "length_report.csv", csv.str());
        }
        write_text(run.out / "metrics.json", metrics.dump(2) + "\n");
        std::cout << metrics.dump(2) << '\n';
    };
}

Action cmd_make_fixture(const Run& run) {
    WorldConfig world;
    world.concepts = get_or(run.config, "/fixture/concepts", world.concepts);
    world.seed = derive_seed(run.seed, "fixture/world");
    const auto prompt_count = get_or<std::size_t>(run.config, "/fixture/prompts", 10);
    const auto prompt_len = get_or<std::size_t>(run.config, "/fixture/prompt_len", 8);
    const auto max_len = get_or<std::size_t>(run.config, "/fixture/max_len", 60);
    const auto train_pairs = get_or<std::size_t>(run.config, "/fixture/train_pairs", 600);
    if (prompt_len == 0 || max_len == 0) throw UsageError("fixture lengths must be positive");

    return [=, &run] {
        auto made = make_world(world);
        auto vocab = std::make_shared<const Vocabulary>(std::move(made.vocab));
        vocab->save(run.out / "vocab.tsv");
        {
            std::ostringstream dict;
            for (const auto& line : run.preamble()) dict << "# " << line << '\n';
            dict << "# " << made.dictionary.source_lang << '\t' << made.dictionary.target_lang << '\n';
            for (const auto& e : made.dictionary.entries) dict << e.source << '\t' << e.target << '\n';
            write_text(run.out / "dictionary.tsv", dict.str());
        }
        const ToyLmConfig lm_config;
        ToyLm lm(vocab, lm_config);
        const auto prompts = make_prompts(lm, "en", prompt_count, prompt_len, derive_seed(run.seed, "fixture/prompts"));
        std::vector<CorpusRecord> records(prompts.size());
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            char id[16];
            std::snprintf(id, sizeof id, "p%04zu", i);
            records[i].id = id;
            records[i].prompt = prompts[i];
        }
        write_prompts(run.out / "prompts.jsonl", records);

        const KgwConfig kgw;
        const UwConfig uw;
        const ToyEmbeddingConfig emb;
        const TrainingConfig training;
        const json config = {
            {"seed", run.seed},
            {"fixture_config_hash", run.hash},
            {"vocab", "vocab.tsv"},
            {"lm", {{"order", lm_config.order}, {"seed", lm_config.seed}}},
            {"engine",
             {{"scheme", "KGW"},
              {"kgw", {{"gamma", kgw.gamma}, {"delta", kgw.delta}, {"hash_window", kgw.hash_window}, {"hash_key", kgw.hash_key}}},
              {"uw", {{"hash_window", uw.hash_window}, {"tv_bound", uw.tv_bound}, {"hash_key", uw.hash_key}}},
              {"sir", {{"model", "sir_model.json"}, {"clustering", "clustering.json"}, {"scale", SirEngineConfig{}.scale}}}}},
            {"generate", {{"prompts", "prompts.jsonl"}, {"max_len", max_len}}},
            {"attack",
             {{"kind", "CWRA"},
              {"pivot_lang", "zh"},
              {"original_lang", "en"},
              {"translator", {{"kind", "mock"}, {"noise_rate", 0.1}, {"reorder_window", 3}, {"clustering", "clustering.json"}}},
              {"paraphraser", {{"noise_rate", 0.5}, {"reorder_window", 2}}}}},
            {"detect", {{"field", "response"}, {"use_prompt_context", true}}},
            {"cluster", {{"dictionary", "dictionary.tsv"}}},
            {"train_sir",
             {{"variant", "XSIR"},
              {"clustering", "clustering.json"},
              {"embedding", {{"dim", emb.dim}, {"seed", emb.seed}, {"window", emb.window}}},
              {"hidden", {64, 64, 64}},
              {"pairs", {{"count", train_pairs}, {"min_len", 1}, {"max_len", 16}, {"translated_share", 0.2}, {"perturbed_share", 0.5}}},
              {"training",
               {{"learning_rate", 1e-3},
                {"lambda1", training.lambda1},
                {"lambda2", training.lambda2},
                {"epochs", 8},
                {"batch_size", training.batch_size}}}}},
            {"evaluate", {{"bin_width", 25}, {"epsilon", 0.05}, {"normalization", "joint"}, {"fpr", 0.1}}},
        };
        write_text(run.out / "config.json", config.dump(2) + "\n");
        std::fprintf(stderr, "make-fixture: %zu tokens, %zu dictionary entries, %zu prompts\n", vocab->size(),
                     made.dictionary.entries.size(), prompts.size());
    };
}

using CommandFn = Action (*)(const Run&);

const std::map<std::string, CommandFn>& commands() {
    static const std::map<std::string, CommandFn> table = {
        {"generate", cmd_generate}, {"attack", cmd_attack},       {"detect", cmd_detect},
        {"cluster", cmd_cluster},   {"train-sir", cmd_train_sir}, {"evaluate", cmd_evaluate},
        {"make-fixture", cmd_make_fixture},
    };
    return table;
}

// Loads --config (a run config or a manifest) and returns the command's
// sections with paths made absolute, plus the config's own seed if any.
json load_sections(const std::string& command, const std::string& config_path, std::optional<std::uint64_t>& seed) {
    json full = json::object();
    fs::path base = fs::current_path();
    if (!config_path.empty()) {
        full = read_json(config_path);
        base = fs::absolute(config_path).parent_path();
        if (full.contains("command") && full.contains("config")) {
            if (full["command"] != command) {
                throw UsageError("manifest " + config_path + " is for '" + full["command"].get<std::string>() + "'");
            }
            if (!seed) seed = full.at("seed").get<std::uint64_t>();
            full = full["config"];
        } else if (!seed && full.contains("seed")) {
            seed = full["seed"].get<std::uint64_t>();
        }
    }
    json out = json::object();
    for (const auto& section : command_sections().at(command)) {
        if (full.contains(section)) out[section] = full[section];
    }
    for (const auto& key : path_keys()) {
        if (!out.contains(key)) continue;
        if (!out[key].is_string()) throw UsageError(key.to_string() + " must be a path string");
        const fs::path p = out[key].get<std::string>();
        out[key] = (p.is_absolute() ? p : base / p).lexically_normal().string();
    }
    return out;
}

int execute(const std::string& command, json config, std::uint64_t seed, const std::string& out, std::size_t jobs) {
    Run run;
    run.command = command;
    run.seed = seed;
    run.jobs = std::max<std::size_t>(jobs, 1);
    Action action;
    try {
        if (out.empty()) throw UsageError("--out is required");
        run.out = out;
        run.config = std::move(config);
        run.hash = content_hash(command, run.config);
        action = commands().at(command)(run);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "xwm %s: %s\n", command.c_str(), e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "xwm %s: invalid config: %s\n", command.c_str(), e.what());
        return 2;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "xwm %s: invalid config: %s\n", command.c_str(), e.what());
        return 2;
    }
    try {
        fs::create_directories(run.out);
        action();
        write_manifest(run);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "xwm %s: %s\n", command.c_str(), e.what());
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-lingual text watermarking toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
    app.add_option("--config", config_path, "Run config or manifest (JSON)");
    app.add_option("--seed", seed, "Top-level seed; overrides the config");
    app.add_option("--out", out, "Output directory");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    // Flag overrides, keyed by the config pointer they set.
    std::map<std::string, std::string> overrides;
    std::map<std::string, std::size_t> size_overrides;
    std::map<std::string, double> real_overrides;
    std::vector<std::string> path_overrides;
    auto text = [&](CLI::App* sub, const char* flag, const char* pointer, const char* help, bool is_path = false) {
        sub->add_option_function<std::string>(flag, [&overrides, pointer](const std::string& v) { overrides[pointer] = v; }, help);
        if (is_path) path_overrides.push_back(pointer);
    };
    auto size = [&](CLI::App* sub, const char* flag, const char* pointer, const char* help) {
        sub->add_option_function<std::size_t>(flag, [&size_overrides, pointer](std::size_t v) { size_overrides[pointer] = v; }, help);
    };
    auto real = [&](CLI::App* sub, const char* flag, const char* pointer, const char* help) {
        sub->add_option_function<double>(flag, [&real_overrides, pointer](double v) { real_overrides[pointer] = v; }, help);
    };

    auto* gen = app.add_subcommand("generate", "Generate responses for a prompt file");
    text(gen, "--engine", "/engine/scheme", "KGW, UW, SIR, XSIR or none");
    text(gen, "--prompts", "/generate/prompts", "Prompt JSONL", true);
    size(gen, "--max-len", "/generate/max_len", "Response length");

    auto* attack = app.add_subcommand("attack", "Attack a corpus (RE_TRANSLATION, PARAPHRASE, CWRA)");
    text(attack, "--kind", "/attack/kind", "Attack kind");
    text(attack, "--input", "/attack/input", "Corpus JSONL", true);
    text(attack, "--engine", "/engine/scheme", "Engine for CWRA generation");
    text(attack, "--pivot", "/attack/pivot_lang", "Pivot language");
    text(attack, "--translator", "/attack/translator/kind", "mock, identity or external");
    text(attack, "--endpoint", "/attack/translator/endpoint", "External translator URL");
    real(attack, "--noise-rate", "/attack/translator/noise_rate", "Mock translator noise rate");
    size(attack, "--max-len", "/generate/max_len", "CWRA response length");

    auto* detect = app.add_subcommand("detect", "Score a corpus");
    text(detect, "--engine", "/engine/scheme", "Detector scheme");
    text(detect, "--input", "/detect/input", "Corpus JSONL", true);
    text(detect, "--field", "/detect/field", "response, attacked_response or pivot_response");

    auto* cluster = app.add_subcommand("cluster", "Cluster the vocabulary from a bilingual dictionary");
    text(cluster, "--dictionary", "/cluster/dictionary", "Dictionary TSV", true);

    auto* trainer = app.add_subcommand("train-sir", "Train a SIR or X-SIR watermark model");
    text(trainer, "--variant", "/train_sir/variant", "SIR or XSIR");
    size(trainer, "--epochs", "/train_sir/training/epochs", "Training epochs");
    size(trainer, "--pairs", "/train_sir/pairs/count", "Training pairs");

    auto* evaluate = app.add_subcommand("evaluate", "PCC, RE, ROC/AUC and strength-vs-length");
    text(evaluate, "--before", "/evaluate/before", "Detections before the attack", true);
    text(evaluate, "--after", "/evaluate/after", "Detections after the attack", true);
    text(evaluate, "--watermarked", "/evaluate/watermarked", "Detections of watermarked texts", true);
    text(evaluate, "--clean", "/evaluate/clean", "Detections of clean texts", true);

    auto* fixture = app.add_subcommand("make-fixture", "Write a seeded synthetic vocabulary, dictionary, prompts and config");
    size(fixture, "--prompts", "/fixture/prompts", "Number of prompts");
    size(fixture, "--prompt-len", "/fixture/prompt_len", "Prompt length");
    size(fixture, "--max-len", "/fixture/max_len", "Response length in the config");
    size(fixture, "--concepts", "/fixture/concepts", "Number of concepts");
    size(fixture, "--train-pairs", "/fixture/train_pairs", "Training pairs in the config");

    std::string manifest_path;
    auto* rerun = app.add_subcommand("rerun", "Repeat a command from its manifest");
    rerun->add_option("manifest", manifest_path, "Manifest JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();

    if (command == "rerun") {
        try {
            const json manifest = read_json(manifest_path);
            const auto name = manifest.at("command").get<std::string>();
            if (!commands().count(name)) throw UsageError("manifest names unknown command '" + name + "'");
            return execute(name, manifest.at("config"), seed.value_or(manifest.at("seed").get<std::uint64_t>()), out, jobs);
        } catch (const UsageError& e) {
            std::fprintf(stderr, "xwm rerun: %s\n", e.what());
            return 2;
        } catch (const json::exception& e) {
            std::fprintf(stderr, "xwm rerun: bad manifest: %s\n", e.what());
            return 2;
        }
    }

    json config;
    try {
        if (config_path.empty() && command != "make-fixture") throw UsageError("--config is required");
        config = load_sections(command, config_path, seed);
        for (const auto& [pointer, value] : overrides) {
            const bool is_path = std::find(path_overrides.begin(), path_overrides.end(), pointer) != path_overrides.end();
            config[json::json_pointer(pointer)] = is_path ? fs::absolute(value).lexically_normal().string() : value;
        }
        for (const auto& [pointer, value] : size_overrides) config[json::json_pointer(pointer)] = value;
        for (const auto& [pointer, value] : real_overrides) config[json::json_pointer(pointer)] = value;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "xwm %s: %s\n", command.c_str(), e.what());
        return 2;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "xwm %s: invalid config: %s\n", command.c_str(), e.what());
        return 2;
    }
    return execute(command, std::move(config), seed.value_or(0), out, jobs);
}
