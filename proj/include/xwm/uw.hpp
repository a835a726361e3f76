#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "xwm/watermark.hpp"

namespace xwm {

struct UwConfig {
    std::size_t hash_window = 5;
    /// Total-variation budget d of the maximin detector.
    double tv_bound = 0.0;
    /// Score contributed by a position whose robust likelihood is zero.
    double zero_probability_floor = -10.0;
    std::uint64_t hash_key = 2971215073ULL;

    void validate() const;
};

/// Uniform p in [0, 1) from an order-sensitive hash of the last
/// `hash_window` ids of `prefix` (BOS-padded).
double uw_uniform(std::span<const TokenId> prefix, const UwConfig& config);

/// Inverse transform: the unique t with cdf(t-1) <= p < cdf(t). Tokens with
/// zero probability are never returned.
TokenId its_select(std::span<const double> probs, double p);

/// The reweighted next-token distribution: a point mass on the ITS choice.
std::vector<double> uw_point_mass(std::span<const double> probs, double p);

/// Token emitted by the unbiased watermark for this step.
TokenId uw_sample(std::span<const double> logits, std::span<const TokenId> prefix, const UwConfig& config);

/// Distribution minimising KL(Q' || model) over the TV ball of radius
/// `tv_bound` around `watermarked`. It has the form median(lo*P, Q, hi*P) with
/// the two multipliers found by bisection so that exactly `tv_bound` mass is
/// moved; if the model distribution lies inside the ball it is returned.
std::vector<double> robust_watermark_distribution(std::span<const double> model, std::span<const double> watermarked,
                                                  double tv_bound);

/// Maximin log-likelihood ratio of the observed token: log(Q*(x) / P(x)) with
/// Q* from robust_watermark_distribution. Returns `floor` when Q*(x) is zero.
double maximin_llr(std::span<const double> model, std::span<const double> watermarked, TokenId observed,
                   double tv_bound, double floor);

/// Sum of per-position maximin LLRs. The model distribution at each position
/// is recomputed from `context` followed by the text so far; `context` also
/// fills the hash window for the first positions.
StrengthScore uw_score(const TokenSequence& text, const LanguageModel& model, const UwConfig& config,
                       std::span<const TokenId> context = {});

class UwEngine final : public WatermarkEngine {
public:
    UwEngine(UwConfig config, std::shared_ptr<const LanguageModel> model);

    Scheme scheme() const noexcept override { return Scheme::UwLlr; }
    std::optional<TokenId> select(const TokenSequence& prefix, std::span<const double> probs) const override;
    StrengthScore score(const TokenSequence& text, std::span<const TokenId> context = {}) const override;

    const UwConfig& config() const noexcept { return config_; }

private:
    UwConfig config_;
    std::shared_ptr<const LanguageModel> model_;
};

}  // namespace xwm
