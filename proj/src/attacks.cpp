#include "xwm/attacks.hpp"

#include <algorithm>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace xwm {

TokenSequence IdentityTranslator::translate(const TokenSequence& text, std::string_view, std::string_view to) const {
    return {text.ids, std::string(to)};
}

void MockTranslatorConfig::validate() const {
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw std::invalid_argument("noise rate must lie in [0, 1]");
    if (reorder_window < 1) throw std::invalid_argument("reorder window must be >= 1");
}

void local_reorder(std::vector<TokenId>& ids, std::size_t window, CounterRng& rng) {
    if (window < 2) return;
    for (std::size_t start = 0; start < ids.size(); start += window) {
        const std::size_t len = std::min(window, ids.size() - start);
        for (std::size_t i = len; i > 1; --i) {
            std::swap(ids[start + i - 1], ids[start + static_cast<std::size_t>(rng.below(i))]);
        }
    }
}

namespace {

std::uint64_t text_key(std::uint64_t seed, const TokenSequence& text, std::string_view from, std::string_view to) {
    std::uint64_t h = derive_seed(seed, from);
    h = hash_combine(h, fnv1a64(to));
    for (TokenId id : text.ids) h = hash_combine(h, id);
    return h;
}

std::vector<TokenId> mates_in(const Vocabulary& vocab, const SemanticClustering& clustering, TokenId token,
                              std::string_view lang) {
    std::vector<TokenId> out;
    for (TokenId m : clustering.members(clustering.cluster_index(token))) {
        if (vocab.language(m) == lang) out.push_back(m);
    }
    return out;
}

void check_ids(const TokenSequence& text, const SemanticClustering& clustering) {
    for (TokenId id : text.ids) {
        if (id >= clustering.vocab_size()) throw std::out_of_range("token " + std::to_string(id) + " outside vocabulary");
    }
}

}  // namespace

MockDictionaryTranslator::MockDictionaryTranslator(std::shared_ptr<const Vocabulary> vocab,
                                                   std::shared_ptr<const SemanticClustering> clustering,
                                                   MockTranslatorConfig config)
    : vocab_(std::move(vocab)), clustering_(std::move(clustering)), config_(config) {
    config_.validate();
    if (!vocab_ || !clustering_) throw std::invalid_argument("MockDictionaryTranslator needs a vocabulary and clustering");
    if (vocab_->size() != clustering_->vocab_size()) {
        throw std::invalid_argument("MockDictionaryTranslator: clustering does not match the vocabulary");
    }
}

TokenSequence MockDictionaryTranslator::translate(const TokenSequence& text, std::string_view from,
                                                  std::string_view to) const {
    check_ids(text, *clustering_);
    CounterRng rng(text_key(config_.seed, text, from, to));
    TokenSequence out{{}, std::string(to)};
    out.ids.reserve(text.size());
    for (TokenId id : text.ids) {
        const auto targets = mates_in(*vocab_, *clustering_, id, to);
        if (targets.empty()) {
            out.ids.push_back(id);
            continue;
        }
        TokenId chosen = targets.front();
        if (targets.size() > 1 && rng.uniform() < config_.noise_rate) {
            chosen = targets[1 + static_cast<std::size_t>(rng.below(targets.size() - 1))];
        }
        out.ids.push_back(chosen);
    }
    local_reorder(out.ids, config_.reorder_window, rng);
    return out;
}

MockParaphraser::MockParaphraser(std::shared_ptr<const Vocabulary> vocab,
                                 std::shared_ptr<const SemanticClustering> clustering, MockTranslatorConfig config)
    : vocab_(std::move(vocab)), clustering_(std::move(clustering)), config_(config) {
    config_.validate();
    if (!vocab_ || !clustering_) throw std::invalid_argument("MockParaphraser needs a vocabulary and clustering");
    if (vocab_->size() != clustering_->vocab_size()) {
        throw std::invalid_argument("MockParaphraser: clustering does not match the vocabulary");
    }
}

TokenSequence MockParaphraser::paraphrase(const TokenSequence& text) const {
    check_ids(text, *clustering_);
    CounterRng rng(text_key(config_.seed, text, "paraphrase", text.language));
    TokenSequence out = text;
    for (TokenId& id : out.ids) {
        auto mates = mates_in(*vocab_, *clustering_, id, vocab_->language(id));
        std::erase(mates, id);
        if (!mates.empty() && rng.uniform() < config_.noise_rate) {
            id = mates[static_cast<std::size_t>(rng.below(mates.size()))];
        }
    }
    local_reorder(out.ids, config_.reorder_window, rng);
    return out;
}

namespace {

std::counting_semaphore<4>& request_slots() {
    static std::counting_semaphore<4> slots(4);
    return slots;
}

}  // namespace

ExternalTranslatorClient::ExternalTranslatorClient(ExternalTranslatorConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("translator endpoint '" + config_.endpoint + "' lacks a scheme");
    }
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    host_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
    if (config_.retries < 0) throw std::invalid_argument("translator retries must be >= 0");
}

TokenSequence ExternalTranslatorClient::translate(const TokenSequence& text, std::string_view from,
                                                  std::string_view to) const {
    const nlohmann::json body = {{"text", text.ids}, {"from", from}, {"to", to}};
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50) * (1 << (attempt - 1)));
        httplib::Result res;
        {
            auto& slots = request_slots();
            slots.acquire();
            httplib::Client client(host_);
            client.set_connection_timeout(config_.timeout);
            client.set_read_timeout(config_.timeout);
            client.set_write_timeout(config_.timeout);
            res = client.Post(path_, payload, "application/json");
            slots.release();
        }
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw std::runtime_error("translator returned HTTP " + std::to_string(res->status));
        const auto reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_array()) {
            throw std::runtime_error("translator reply is not {\"text\": [ids]}");
        }
        return {reply["text"].get<std::vector<TokenId>>(), std::string(to)};
    }
    throw std::runtime_error("translator at " + config_.endpoint + " failed after " +
                             std::to_string(config_.retries + 1) + " attempts: " + last_error);
}

std::string_view to_string(AttackKind kind) noexcept {
    switch (kind) {
        case AttackKind::ReTranslation: return "RE_TRANSLATION";
        case AttackKind::Paraphrase: return "PARAPHRASE";
        case AttackKind::Cwra: return "CWRA";
    }
    return "?";
}

AttackKind parse_attack_kind(std::string_view name) {
    if (name == "RE_TRANSLATION") return AttackKind::ReTranslation;
    if (name == "PARAPHRASE") return AttackKind::Paraphrase;
    if (name == "CWRA") return AttackKind::Cwra;
    throw std::invalid_argument("unknown attack '" + std::string(name) +
                                "' (expected RE_TRANSLATION, PARAPHRASE or CWRA)");
}

void AttackSpec::validate() const {
    if (kind == AttackKind::Paraphrase) return;
    if (pivot_lang.empty() || original_lang.empty()) throw std::invalid_argument("attack languages must be set");
    if (pivot_lang == original_lang) {
        throw std::invalid_argument("pivot language must differ from the original language");
    }
}

std::string_view to_string(AttackStage stage) noexcept {
    switch (stage) {
        case AttackStage::TranslatePrompt: return "translate_prompt";
        case AttackStage::Generate: return "generate";
        case AttackStage::TranslateToPivot: return "translate_to_pivot";
        case AttackStage::TranslateBack: return "translate_back";
        case AttackStage::Paraphrase: return "paraphrase";
    }
    return "?";
}

StageError::StageError(AttackStage stage, const std::string& message)
    : std::runtime_error(std::string(to_string(stage)) + ": " + message), stage_(stage) {}

TokenSequence retranslation_attack(const TokenSequence& response, const Translator& translator,
                                   std::string_view pivot, std::string_view original, TokenSequence* pivot_out) {
    TokenSequence pivot_text;
    try {
        pivot_text = translator.translate(response, original, pivot);
    } catch (const std::exception& e) {
        throw StageError(AttackStage::TranslateToPivot, e.what());
    }
    if (pivot_out) *pivot_out = pivot_text;
    try {
        return translator.translate(pivot_text, pivot, original);
    } catch (const std::exception& e) {
        throw StageError(AttackStage::TranslateBack, e.what());
    }
}

TokenSequence paraphrase_attack(const TokenSequence& response, const Paraphraser& paraphraser) {
    try {
        return paraphraser.paraphrase(response);
    } catch (const std::exception& e) {
        throw StageError(AttackStage::Paraphrase, e.what());
    }
}

CwraResult cwra(const TokenSequence& prompt, const LanguageModel& model, const WatermarkEngine* engine,
                const Translator& translator, const AttackSpec& spec, const GenerationOptions& options) {
    spec.validate();
    CwraResult result;
    try {
        result.pivot_prompt = translator.translate(prompt, spec.original_lang, spec.pivot_lang);
        result.pivot_prompt.language = spec.pivot_lang;
    } catch (const std::exception& e) {
        result.failure = StageFailure{AttackStage::TranslatePrompt, e.what()};
        return result;
    }
    try {
        result.pivot_response = generate(model, result.pivot_prompt, options, engine);
    } catch (const std::exception& e) {
        result.failure = StageFailure{AttackStage::Generate, e.what()};
        return result;
    }
    try {
        result.final_response = translator.translate(result.pivot_response, spec.pivot_lang, spec.original_lang);
        result.final_response.language = spec.original_lang;
    } catch (const std::exception& e) {
        result.failure = StageFailure{AttackStage::TranslateBack, e.what()};
    }
    return result;
}

}  // namespace xwm
