#include "xwm/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "xwm/hashing.hpp"

namespace xwm {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: size mismatch");
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

void normalize(std::span<double> v) {
    const double n = std::sqrt(dot(v, v));
    if (n == 0.0) return;
    for (double& x : v) x /= n;
}

ToyEmbedding::ToyEmbedding(std::shared_ptr<const SemanticClustering> clustering, ToyEmbeddingConfig config)
    : clustering_(std::move(clustering)), config_(config) {
    if (!clustering_) throw std::invalid_argument("ToyEmbedding needs a clustering");
    if (config_.dim == 0 || config_.window == 0) throw std::invalid_argument("ToyEmbedding dim and window must be positive");
    const std::size_t clusters = clustering_->num_clusters();
    bases_.resize(clusters * config_.dim);
    CounterRng rng(derive_seed(config_.seed, "toy-embedding-bases"));
    for (std::size_t c = 0; c < clusters; ++c) {
        std::span<double> base(bases_.data() + c * config_.dim, config_.dim);
        for (double& x : base) x = standard_normal(rng);
        normalize(base);
    }
}

std::vector<double> ToyEmbedding::embed(const TokenSequence& prefix) const {
    std::vector<double> out(config_.dim, 0.0);
    auto add_token = [&](TokenId t) {
        const double* base = bases_.data() + static_cast<std::size_t>(clustering_->cluster_index(t)) * config_.dim;
        for (std::size_t k = 0; k < config_.dim; ++k) out[k] += base[k];
    };
    if (prefix.empty()) {
        add_token(kBosId);
    } else {
        const std::size_t start = prefix.size() > config_.window ? prefix.size() - config_.window : 0;
        for (std::size_t i = start; i < prefix.size(); ++i) add_token(prefix.ids[i]);
    }
    normalize(out);
    return out;
}

}  // namespace xwm
