#pragma once

#include <memory>
#include <span>
#include <vector>

#include "xwm/clustering.hpp"
#include "xwm/embedding.hpp"
#include "xwm/sir_model.hpp"
#include "xwm/watermark.hpp"

namespace xwm {

/// logits + scale * delta. Throws std::invalid_argument on a length mismatch.
std::vector<double> sir_adjust(std::span<const double> logits, std::span<const double> delta, double scale);

/// logits[i] + scale * cluster_delta[C(i)]. Throws std::invalid_argument when
/// the clustering does not cover the logits or the delta width is not |C|.
std::vector<double> xsir_adjust(std::span<const double> logits, std::span<const double> cluster_delta,
                                const SemanticClustering& clustering, double scale);

/// Source of the per-prefix bias vector used at detection time.
class DeltaSource {
public:
    virtual ~DeltaSource() = default;
    virtual std::vector<double> delta(const TokenSequence& prefix) const = 0;
};

/// Mean over positions n of delta(x^{1:n-1})[index(x^n)], where index is the
/// token id or, with a clustering, its cluster. Throws std::invalid_argument on
/// an empty text.
StrengthScore sir_score(const TokenSequence& text, const DeltaSource& source,
                        const SemanticClustering* clustering = nullptr);

/// Embedding followed by the watermark network.
class ModelDeltaSource final : public DeltaSource {
public:
    ModelDeltaSource(std::shared_ptr<const EmbeddingProvider> embedder, std::shared_ptr<const WatermarkModel> model);
    std::vector<double> delta(const TokenSequence& prefix) const override;

private:
    std::shared_ptr<const EmbeddingProvider> embedder_;
    std::shared_ptr<const WatermarkModel> model_;
};

struct SirEngineConfig {
    double scale = 4.0;
};

/// SIR when constructed without a clustering, X-SIR with one.
class SirEngine final : public WatermarkEngine {
public:
    SirEngine(SirEngineConfig config, std::shared_ptr<const EmbeddingProvider> embedder,
              std::shared_ptr<const WatermarkModel> model, std::shared_ptr<const SemanticClustering> clustering = {});

    Scheme scheme() const noexcept override { return clustering_ ? Scheme::XsirMeanBias : Scheme::SirMeanBias; }
    std::vector<double> adjust(const TokenSequence& prefix, std::vector<double> logits) const override;
    StrengthScore score(const TokenSequence& text, std::span<const TokenId> context = {}) const override;

    /// Bias added to each token's logit for this prefix (before scaling).
    std::vector<double> token_bias(const TokenSequence& prefix) const;

private:
    SirEngineConfig config_;
    ModelDeltaSource source_;
    std::shared_ptr<const SemanticClustering> clustering_;
};

}  // namespace xwm
