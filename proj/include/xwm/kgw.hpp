#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xwm/watermark.hpp"

namespace xwm {

struct KgwConfig {
    double gamma = 0.25;
    double delta = 2.0;
    std::size_t hash_window = 4;
    std::uint64_t hash_key = 15485863;

    /// Throws std::invalid_argument unless 0 < gamma < 1, delta > 0, window >= 1.
    void validate() const;
};

struct GreenRedPartition {
    std::vector<bool> green_mask;
    double gamma = 0.0;

    bool is_green(TokenId id) const { return green_mask.at(id); }
    std::size_t green_count() const noexcept;
};

/// Minhash over the last `hash_window` ids of `prefix` (left-padded with BOS):
/// the minimum of mix64(key, id) over the window. Order within the window does
/// not matter, and tokens before it never do.
std::uint64_t kgw_context_hash(std::span<const TokenId> prefix, const KgwConfig& config);

/// Green list of exactly round(gamma * vocab_size) tokens, chosen by a partial
/// Fisher-Yates shuffle driven by a counter RNG keyed on the context hash.
GreenRedPartition kgw_partition(std::span<const TokenId> prefix, const KgwConfig& config, std::size_t vocab_size);

/// Adds `delta` to every green logit. Throws std::invalid_argument on a length
/// mismatch.
std::vector<double> kgw_adjust(std::span<const double> logits, const GreenRedPartition& partition, double delta);

/// (green - gamma*T) / sqrt(T*gamma*(1-gamma)) over T scored tokens.
double kgw_z_score(std::size_t green, std::size_t scored, double gamma);

/// Scores every token that has a full hash window inside `text`, i.e. the
/// last size - hash_window tokens. Throws std::invalid_argument when the text
/// is not longer than the window.
StrengthScore kgw_score(const TokenSequence& text, const KgwConfig& config, std::size_t vocab_size);

/// Number of scored tokens in `text` that are green (the |x|_g of the z-score).
std::size_t kgw_green_count(const TokenSequence& text, const KgwConfig& config, std::size_t vocab_size);

class KgwEngine final : public WatermarkEngine {
public:
    KgwEngine(KgwConfig config, std::size_t vocab_size);

    Scheme scheme() const noexcept override { return Scheme::KgwZ; }
    std::vector<double> adjust(const TokenSequence& prefix, std::vector<double> logits) const override;
    StrengthScore score(const TokenSequence& text, std::span<const TokenId> context = {}) const override;

    const KgwConfig& config() const noexcept { return config_; }

private:
    KgwConfig config_;
    std::size_t vocab_size_;
};

}  // namespace xwm
