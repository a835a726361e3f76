#include "xwm/sir.hpp"

#include <stdexcept>

namespace xwm {

std::vector<double> sir_adjust(std::span<const double> logits, std::span<const double> delta, double scale) {
    if (logits.size() != delta.size()) throw std::invalid_argument("sir_adjust: logits and delta lengths differ");
    std::vector<double> out(logits.begin(), logits.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * delta[i];
    return out;
}

std::vector<double> xsir_adjust(std::span<const double> logits, std::span<const double> cluster_delta,
                                const SemanticClustering& clustering, double scale) {
    if (clustering.vocab_size() != logits.size()) {
        throw std::invalid_argument("xsir_adjust: clustering covers " + std::to_string(clustering.vocab_size()) +
                                    " tokens, logits have " + std::to_string(logits.size()));
    }
    if (cluster_delta.size() != clustering.num_clusters()) {
        throw std::invalid_argument("xsir_adjust: delta width differs from the cluster count");
    }
    std::vector<double> out(logits.begin(), logits.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += scale * cluster_delta[clustering.cluster_index(static_cast<TokenId>(i))];
    }
    return out;
}

StrengthScore sir_score(const TokenSequence& text, const DeltaSource& source, const SemanticClustering* clustering) {
    if (text.empty()) throw std::invalid_argument("sir_score: empty text");
    TokenSequence prefix{{}, text.language};
    prefix.ids.reserve(text.size());
    double total = 0.0;
    for (TokenId token : text.ids) {
        const auto delta = source.delta(prefix);
        const std::size_t index = clustering ? clustering->cluster_index(token) : token;
        if (index >= delta.size()) throw std::out_of_range("sir_score: token outside the bias vector");
        total += delta[index];
        prefix.ids.push_back(token);
    }
    return {total / static_cast<double>(text.size()), clustering ? Scheme::XsirMeanBias : Scheme::SirMeanBias,
            text.size()};
}

ModelDeltaSource::ModelDeltaSource(std::shared_ptr<const EmbeddingProvider> embedder,
                                   std::shared_ptr<const WatermarkModel> model)
    : embedder_(std::move(embedder)), model_(std::move(model)) {
    if (!embedder_ || !model_) throw std::invalid_argument("ModelDeltaSource needs an embedder and a model");
}

std::vector<double> ModelDeltaSource::delta(const TokenSequence& prefix) const {
    return model_->forward(embedder_->embed(prefix));
}

SirEngine::SirEngine(SirEngineConfig config, std::shared_ptr<const EmbeddingProvider> embedder,
                     std::shared_ptr<const WatermarkModel> model, std::shared_ptr<const SemanticClustering> clustering)
    : config_(config), source_(std::move(embedder), model), clustering_(std::move(clustering)) {
    if (clustering_ && model->output_dim() != clustering_->num_clusters()) {
        throw std::invalid_argument("SirEngine: X-SIR model output width " + std::to_string(model->output_dim()) +
                                    " differs from cluster count " + std::to_string(clustering_->num_clusters()));
    }
}

std::vector<double> SirEngine::token_bias(const TokenSequence& prefix) const {
    auto delta = source_.delta(prefix);
    if (!clustering_) return delta;
    std::vector<double> bias(clustering_->vocab_size());
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = delta[clustering_->cluster_index(static_cast<TokenId>(i))];
    return bias;
}

std::vector<double> SirEngine::adjust(const TokenSequence& prefix, std::vector<double> logits) const {
    const auto delta = source_.delta(prefix);
    if (clustering_) return xsir_adjust(logits, delta, *clustering_, config_.scale);
    return sir_adjust(logits, delta, config_.scale);
}

StrengthScore SirEngine::score(const TokenSequence& text, std::span<const TokenId>) const {
    return sir_score(text, source_, clustering_.get());
}

}  // namespace xwm
