#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xwm {

using TokenId = std::uint32_t;

/// Id 0 is reserved for the beginning-of-sequence token in every vocabulary
/// file. Hash windows shorter than required are left-padded with it.
inline constexpr TokenId kBosId = 0;

class Vocabulary {
public:
    /// `languages` is either empty (all tokens language-neutral) or aligned
    /// with `tokens`; an empty tag marks a neutral token.
    explicit Vocabulary(std::vector<std::string> tokens, std::vector<std::string> languages = {});

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(TokenId id) const;
    const std::string& language(TokenId id) const;
    std::optional<TokenId> find(std::string_view token) const;
    bool contains(TokenId id) const noexcept { return id < tokens_.size(); }

    /// Tokens tagged with `lang`, in id order.
    std::vector<TokenId> tokens_in(std::string_view lang) const;

    /// `token<TAB>lang` per line; the tag is optional.
    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::string> tokens_;
    std::vector<std::string> languages_;
    std::unordered_map<std::string, TokenId> index_;
};

struct TokenSequence {
    std::vector<TokenId> ids;
    std::string language;

    std::size_t size() const noexcept { return ids.size(); }
    bool empty() const noexcept { return ids.empty(); }
    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Throws std::out_of_range if any id is outside the vocabulary.
void validate(const TokenSequence& seq, const Vocabulary& vocab);

/// Numerically stable softmax. Throws std::invalid_argument on non-finite
/// input or an empty vector.
std::vector<double> softmax(std::span<const double> logits);

/// Inverse-CDF draw from `probs` using one 64-bit word of `rng`. Never returns
/// an index with zero probability.
TokenId sample_multinomial(std::span<const double> probs, std::mt19937_64& rng);

class LanguageModel {
public:
    virtual ~LanguageModel() = default;
    virtual std::size_t vocab_size() const = 0;
    /// Must be deterministic and safe to call concurrently.
    virtual std::vector<double> next_logits(const TokenSequence& prefix) const = 0;
};

struct ToyLmConfig {
    int order = 2;
    std::uint64_t seed = 7;
};

/// Seeded random n-gram model. Logits for a context are hashed on demand from
/// (seed, last order-1 tokens, candidate) and lie in [-5, 5]. Tokens tagged
/// with a language other than the prefix language, and BOS, sit at the floor.
class ToyLm final : public LanguageModel {
public:
    static constexpr double kLogitBound = 5.0;

    ToyLm(std::shared_ptr<const Vocabulary> vocab, ToyLmConfig config);

    std::size_t vocab_size() const override { return vocab_->size(); }
    std::vector<double> next_logits(const TokenSequence& prefix) const override;

    const ToyLmConfig& config() const noexcept { return config_; }
    const Vocabulary& vocabulary() const noexcept { return *vocab_; }

private:
    std::shared_ptr<const Vocabulary> vocab_;
    ToyLmConfig config_;
};

class WatermarkEngine;

struct GenerationOptions {
    std::size_t max_len = 200;
    std::uint64_t seed = 0;
    std::optional<TokenId> stop_token;
};

/// Autoregressive sampling at temperature 1. With an engine, each step's
/// logits go through `engine->adjust` and the engine may override the draw.
/// Returns the response only, tagged with the prompt's language.
TokenSequence generate(const LanguageModel& model, const TokenSequence& prompt,
                       const GenerationOptions& options, const WatermarkEngine* engine = nullptr);

}  // namespace xwm
