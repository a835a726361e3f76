#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "xwm/clustering.hpp"
#include "xwm/lm.hpp"

namespace xwm {

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const noexcept = 0;
    /// Deterministic, unit-norm embedding of a prefix.
    virtual std::vector<double> embed(const TokenSequence& prefix) const = 0;
};

struct ToyEmbeddingConfig {
    std::size_t dim = 32;
    std::uint64_t seed = 11;
    /// Number of trailing tokens pooled into the embedding.
    std::size_t window = 8;
};

/// Bag-of-clusters embedding: the normalised sum of per-cluster Gaussian base
/// vectors over the last `window` tokens. Prefixes whose cluster sequences
/// agree embed identically whatever their language. The empty prefix embeds
/// as the base vector of BOS's cluster.
class ToyEmbedding final : public EmbeddingProvider {
public:
    ToyEmbedding(std::shared_ptr<const SemanticClustering> clustering, ToyEmbeddingConfig config);

    std::size_t dim() const noexcept override { return config_.dim; }
    std::vector<double> embed(const TokenSequence& prefix) const override;

    const ToyEmbeddingConfig& config() const noexcept { return config_; }

private:
    std::shared_ptr<const SemanticClustering> clustering_;
    ToyEmbeddingConfig config_;
    std::vector<double> bases_;  // num_clusters x dim
};

double dot(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
void normalize(std::span<double> v);

}  // namespace xwm
