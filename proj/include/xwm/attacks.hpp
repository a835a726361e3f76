#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "xwm/clustering.hpp"
#include "xwm/hashing.hpp"
#include "xwm/lm.hpp"
#include "xwm/watermark.hpp"

namespace xwm {

class Translator {
public:
    virtual ~Translator() = default;
    /// The result is tagged `to`.
    virtual TokenSequence translate(const TokenSequence& text, std::string_view from, std::string_view to) const = 0;
};

class Paraphraser {
public:
    virtual ~Paraphraser() = default;
    virtual TokenSequence paraphrase(const TokenSequence& text) const = 0;
};

/// Relabels the language and leaves the tokens alone.
class IdentityTranslator final : public Translator {
public:
    TokenSequence translate(const TokenSequence& text, std::string_view from, std::string_view to) const override;
};

struct MockTranslatorConfig {
    /// Probability of picking a non-canonical cluster-mate.
    double noise_rate = 0.1;
    /// Block size of the seeded local shuffle; 1 keeps word order.
    std::size_t reorder_window = 3;
    std::uint64_t seed = 5;

    void validate() const;
};

/// Shuffles consecutive blocks of `window` tokens in place.
void local_reorder(std::vector<TokenId>& ids, std::size_t window, CounterRng& rng);

/// Cluster-level translator. Each token becomes the smallest-id member of its
/// cluster tagged with the target language (a random other such member with
/// probability noise_rate); tokens whose cluster has no target-language
/// member are copied. Randomness is keyed on (seed, input, languages), so a
/// call is a pure function of its arguments.
class MockDictionaryTranslator final : public Translator {
public:
    MockDictionaryTranslator(std::shared_ptr<const Vocabulary> vocab,
                             std::shared_ptr<const SemanticClustering> clustering, MockTranslatorConfig config);

    TokenSequence translate(const TokenSequence& text, std::string_view from, std::string_view to) const override;

private:
    std::shared_ptr<const Vocabulary> vocab_;
    std::shared_ptr<const SemanticClustering> clustering_;
    MockTranslatorConfig config_;
};

/// Same-language synonym substitution within clusters plus local reorder.
class MockParaphraser final : public Paraphraser {
public:
    MockParaphraser(std::shared_ptr<const Vocabulary> vocab, std::shared_ptr<const SemanticClustering> clustering,
                    MockTranslatorConfig config);

    TokenSequence paraphrase(const TokenSequence& text) const override;

private:
    std::shared_ptr<const Vocabulary> vocab_;
    std::shared_ptr<const SemanticClustering> clustering_;
    MockTranslatorConfig config_;
};

struct ExternalTranslatorConfig {
    /// e.g. "http://localhost:8080/translate"
    std::string endpoint;
    std::chrono::milliseconds timeout{10000};
    int retries = 2;
};

/// JSON over HTTP: POST `{"text": [ids], "from": str, "to": str}` and expect
/// `{"text": [ids]}` back. At most four requests are in flight per process.
class ExternalTranslatorClient final : public Translator {
public:
    explicit ExternalTranslatorClient(ExternalTranslatorConfig config);

    TokenSequence translate(const TokenSequence& text, std::string_view from, std::string_view to) const override;

private:
    ExternalTranslatorConfig config_;
    std::string host_;
    std::string path_;
};

enum class AttackKind { ReTranslation, Paraphrase, Cwra };

/// "RE_TRANSLATION", "PARAPHRASE", "CWRA".
std::string_view to_string(AttackKind kind) noexcept;
/// Throws std::invalid_argument on an unknown name.
AttackKind parse_attack_kind(std::string_view name);

struct AttackSpec {
    AttackKind kind = AttackKind::Cwra;
    std::string pivot_lang = "zh";
    std::string original_lang = "en";

    /// CWRA and re-translation need distinct pivot and original languages.
    void validate() const;
};

enum class AttackStage { TranslatePrompt, Generate, TranslateToPivot, TranslateBack, Paraphrase };
std::string_view to_string(AttackStage stage) noexcept;

class StageError : public std::runtime_error {
public:
    StageError(AttackStage stage, const std::string& message);
    AttackStage stage() const noexcept { return stage_; }

private:
    AttackStage stage_;
};

/// Original -> pivot -> original. `pivot_out` receives the intermediate text.
/// Throws StageError naming the failing translation.
TokenSequence retranslation_attack(const TokenSequence& response, const Translator& translator,
                                   std::string_view pivot, std::string_view original,
                                   TokenSequence* pivot_out = nullptr);

TokenSequence paraphrase_attack(const TokenSequence& response, const Paraphraser& paraphraser);

struct StageFailure {
    AttackStage stage;
    std::string message;
};

struct CwraResult {
    TokenSequence pivot_prompt;
    TokenSequence pivot_response;
    TokenSequence final_response;
    std::optional<StageFailure> failure;

    bool ok() const noexcept { return !failure.has_value(); }
};

/// Translate the prompt into the pivot language, generate (watermarked when
/// `engine` is set) in the pivot language, translate the response back.
/// Failures do not throw: the failing stage is recorded and the stages that
/// completed keep their outputs.
CwraResult cwra(const TokenSequence& prompt, const LanguageModel& model, const WatermarkEngine* engine,
                const Translator& translator, const AttackSpec& spec, const GenerationOptions& options);

}  // namespace xwm
