#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "xwm/lm.hpp"

namespace xwm {

enum class Scheme { KgwZ, UwLlr, SirMeanBias, XsirMeanBias };

/// "KGW_Z", "UW_LLR", "SIR_MEANBIAS", "XSIR_MEANBIAS".
std::string_view to_string(Scheme scheme) noexcept;
Scheme parse_scheme(std::string_view name);

struct StrengthScore {
    double value = 0.0;
    Scheme scheme = Scheme::KgwZ;
    std::size_t token_count = 0;
};

/// A watermarking scheme: how it perturbs generation and how it scores a text.
/// Implementations are immutable after construction; all members are safe to
/// call from several threads.
class WatermarkEngine {
public:
    virtual ~WatermarkEngine() = default;

    virtual Scheme scheme() const noexcept = 0;

    /// Logit perturbation for the next token given the full prefix
    /// (prompt plus generated tokens).
    virtual std::vector<double> adjust(const TokenSequence& prefix, std::vector<double> logits) const {
        static_cast<void>(prefix);
        return logits;
    }

    /// Engines that replace sampling return the chosen token; std::nullopt
    /// defers to multinomial sampling over `probs`.
    virtual std::optional<TokenId> select(const TokenSequence& prefix, std::span<const double> probs) const {
        static_cast<void>(prefix);
        static_cast<void>(probs);
        return std::nullopt;
    }

    /// Strength of the watermark in `text`. `context` is the prompt the text
    /// was produced from, when the detector has it; schemes that score the
    /// text on its own ignore it.
    virtual StrengthScore score(const TokenSequence& text, std::span<const TokenId> context = {}) const = 0;
};

}  // namespace xwm
