#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xwm/clustering.hpp"
#include "xwm/embedding.hpp"
#include "xwm/lm.hpp"

namespace xwm {

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;  // out x in, row-major
    std::vector<double> bias;
};

/// Fully connected residual network mapping a prefix embedding to a bias
/// vector over tokens (SIR) or clusters (X-SIR). Hidden layers apply ReLU;
/// a hidden layer whose input and output widths agree adds its input back.
/// The last layer is linear.
class WatermarkModel {
public:
    WatermarkModel() = default;
    WatermarkModel(std::size_t input_dim, std::size_t output_dim, std::vector<std::size_t> hidden = {64, 64, 64});

    /// He-initialised hidden layers and Xavier-scaled output layer from
    /// `seed`; `zero_output` zeroes the last layer instead.
    void initialize(std::uint64_t seed, bool zero_output = false);

    std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in; }
    std::size_t output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().out; }
    std::size_t parameter_count() const noexcept;

    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    /// Activations kept for backpropagation: inputs[l] is the input of layer l,
    /// preact[l] its affine output before ReLU.
    struct Trace {
        std::vector<std::vector<double>> inputs;
        std::vector<std::vector<double>> preact;
    };

    /// Throws std::invalid_argument when the embedding width is wrong.
    std::vector<double> forward(std::span<const double> embedding) const;
    std::vector<double> forward(std::span<const double> embedding, Trace& trace) const;

    /// Accumulates d(loss)/d(params) into `grads` (same shapes as layers()).
    void backward(const Trace& trace, std::span<const double> grad_output, std::vector<DenseLayer>& grads) const;

    std::vector<DenseLayer> zero_gradients() const;

    friend bool operator==(const WatermarkModel& a, const WatermarkModel& b);

private:
    bool is_residual(std::size_t layer) const noexcept;

    std::vector<DenseLayer> layers_;
};

/// One training example: two prefix embeddings and Sim(E(x), E(y)).
struct TrainingPair {
    std::vector<double> x;
    std::vector<double> y;
    double similarity = 0.0;
};

/// mean_i min((d_i - 1)^2, (d_i + 1)^2); zero iff every entry is +-1.
double polarity_regularizer(std::span<const double> delta);

/// (sum_i w_i d_i)^2 with unit weights when `weights` is empty. X-SIR passes
/// cluster sizes so the penalty matches the token-level sum.
double balance_regularizer(std::span<const double> delta, std::span<const double> weights = {});

/// Mean over pairs of |Sim(E(x), E(y)) - cos(model(x), model(y))|.
double alignment_loss(const WatermarkModel& model, std::span<const TrainingPair> pairs);

struct TrainingConfig {
    double learning_rate = 1e-5;
    double lambda1 = 10.0;  // polarity weight
    double lambda2 = 0.1;   // balance weight
    // Carried for completeness; no term of the objective reads them.
    double k1 = 20.0;
    double k2 = 1000.0;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

/// Batch objective: alignment + lambda1 * polarity + lambda2 * balance, with
/// the regularisers averaged over both sides of every pair.
double total_loss(const WatermarkModel& model, std::span<const TrainingPair> pairs, const TrainingConfig& config,
                  std::span<const double> balance_weights = {});

/// Same objective together with its exact gradient.
double total_loss_gradient(const WatermarkModel& model, std::span<const TrainingPair> pairs,
                           const TrainingConfig& config, std::span<const double> balance_weights,
                           std::vector<DenseLayer>& grads);

struct TrainingResult {
    WatermarkModel model;
    /// Mean total loss over the full data set: entry 0 before any update, then
    /// one entry per epoch.
    std::vector<double> loss_curve;
};

/// Mini-batch Adam on the total objective. Batches are drawn from a seeded
/// shuffle, so equal inputs give byte-identical weights and curves. Throws
/// std::runtime_error naming the epoch and batch if the loss turns non-finite.
TrainingResult train(WatermarkModel model, const TrainingConfig& config, std::span<const TrainingPair> data,
                     std::span<const double> balance_weights = {});

struct PairSamplingConfig {
    std::size_t count = 2000;
    std::size_t min_len = 1;
    std::size_t max_len = 16;
    /// Shares of cluster-equal translations and token-level perturbations;
    /// the rest are unrelated pairs.
    double translated_share = 0.2;
    double perturbed_share = 0.5;
    std::uint64_t seed = 3;
};

/// Synthetic prefix pairs drawn from `lm` in the vocabulary's languages. A
/// translated pair swaps every token for a cluster-mate in another language,
/// a perturbed pair replaces one to three tokens, an unrelated pair samples a
/// fresh prefix. The target similarity is the provider's cosine.
std::vector<TrainingPair> make_training_pairs(const LanguageModel& lm, const Vocabulary& vocab,
                                              const SemanticClustering& clustering,
                                              const EmbeddingProvider& embedder, const PairSamplingConfig& config);

enum class SirVariant { Sir, XSir };

/// Everything a detector needs to reproduce the ironer's bias: the network,
/// the embedding it consumes, and the clustering it was trained against.
struct SirArtifact {
    SirVariant variant = SirVariant::Sir;
    WatermarkModel model;
    ToyEmbeddingConfig embedding;
    std::string clustering_checksum;

    void save(const std::filesystem::path& path) const;
    static SirArtifact load(const std::filesystem::path& path);
};

std::string_view to_string(SirVariant variant) noexcept;
SirVariant parse_sir_variant(std::string_view name);

}  // namespace xwm
