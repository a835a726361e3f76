#include "xwm/sir_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "xwm/hashing.hpp"

namespace xwm {

WatermarkModel::WatermarkModel(std::size_t input_dim, std::size_t output_dim, std::vector<std::size_t> hidden) {
    if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("WatermarkModel: zero width");
    std::vector<std::size_t> widths;
    widths.push_back(input_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(output_dim);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer layer;
        layer.in = widths[l];
        layer.out = widths[l + 1];
        layer.weight.assign(layer.in * layer.out, 0.0);
        layer.bias.assign(layer.out, 0.0);
        layers_.push_back(std::move(layer));
    }
}

void WatermarkModel::initialize(std::uint64_t seed, bool zero_output) {
    CounterRng rng(derive_seed(seed, "watermark-model-init"));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        auto& layer = layers_[l];
        const bool last = l + 1 == layers_.size();
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
        if (last && zero_output) {
            std::fill(layer.weight.begin(), layer.weight.end(), 0.0);
            continue;
        }
        const double stddev = std::sqrt((last ? 1.0 : 2.0) / static_cast<double>(layer.in));
        for (double& w : layer.weight) w = stddev * standard_normal(rng);
    }
}

std::size_t WatermarkModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
    return n;
}

bool WatermarkModel::is_residual(std::size_t layer) const noexcept {
    return layer + 1 < layers_.size() && layers_[layer].in == layers_[layer].out;
}

std::vector<double> WatermarkModel::forward(std::span<const double> embedding) const {
    Trace trace;
    return forward(embedding, trace);
}

std::vector<double> WatermarkModel::forward(std::span<const double> embedding, Trace& trace) const {
    if (embedding.size() != input_dim()) {
        throw std::invalid_argument("WatermarkModel: embedding has width " + std::to_string(embedding.size()) +
                                    ", expected " + std::to_string(input_dim()));
    }
    trace.inputs.resize(layers_.size());
    trace.preact.resize(layers_.size());
    std::vector<double> h(embedding.begin(), embedding.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        std::vector<double> z(layer.bias);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* row = layer.weight.data() + o * layer.in;
            double s = 0.0;
            for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * h[i];
            z[o] += s;
        }
        trace.inputs[l] = std::move(h);
        trace.preact[l] = z;
        if (l + 1 < layers_.size()) {
            for (double& v : z) v = std::max(v, 0.0);
            if (is_residual(l)) {
                for (std::size_t o = 0; o < layer.out; ++o) z[o] += trace.inputs[l][o];
            }
        }
        h = std::move(z);
    }
    return h;
}

void WatermarkModel::backward(const Trace& trace, std::span<const double> grad_output,
                              std::vector<DenseLayer>& grads) const {
    std::vector<double> g(grad_output.begin(), grad_output.end());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        const auto& input = trace.inputs[l];
        std::vector<double> gz = g;
        if (l + 1 < layers_.size()) {
            for (std::size_t o = 0; o < layer.out; ++o) {
                if (trace.preact[l][o] <= 0.0) gz[o] = 0.0;
            }
        }
        auto& grad = grads[l];
        std::vector<double> g_in(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double go = gz[o];
            grad.bias[o] += go;
            if (go == 0.0) continue;
            const double* row = layer.weight.data() + o * layer.in;
            double* grow = grad.weight.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) {
                grow[i] += go * input[i];
                g_in[i] += go * row[i];
            }
        }
        if (is_residual(l)) {
            for (std::size_t i = 0; i < layer.in; ++i) g_in[i] += g[i];
        }
        g = std::move(g_in);
    }
}

std::vector<DenseLayer> WatermarkModel::zero_gradients() const {
    std::vector<DenseLayer> grads = layers_;
    for (auto& layer : grads) {
        std::fill(layer.weight.begin(), layer.weight.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    return grads;
}

bool operator==(const WatermarkModel& a, const WatermarkModel& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
        const auto& x = a.layers_[l];
        const auto& y = b.layers_[l];
        if (x.in != y.in || x.out != y.out || x.weight != y.weight || x.bias != y.bias) return false;
    }
    return true;
}

double polarity_regularizer(std::span<const double> delta) {
    if (delta.empty()) return 0.0;
    double s = 0.0;
    for (double d : delta) {
        const double e = std::abs(d) - 1.0;
        s += e * e;
    }
    return s / static_cast<double>(delta.size());
}

double balance_regularizer(std::span<const double> delta, std::span<const double> weights) {
    if (!weights.empty() && weights.size() != delta.size()) {
        throw std::invalid_argument("balance_regularizer: weight count mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) s += (weights.empty() ? 1.0 : weights[i]) * delta[i];
    return s * s;
}

double alignment_loss(const WatermarkModel& model, std::span<const TrainingPair> pairs) {
    if (pairs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& pair : pairs) {
        s += std::abs(pair.similarity - cosine_similarity(model.forward(pair.x), model.forward(pair.y)));
    }
    return s / static_cast<double>(pairs.size());
}

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("training: learning rate must be positive");
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) throw std::invalid_argument("training: lambdas must be positive");
    if (batch_size == 0) throw std::invalid_argument("training: batch size must be positive");
}

namespace {

struct PairTerms {
    double loss = 0.0;
    std::vector<double> grad_x;
    std::vector<double> grad_y;
};

// Loss of one pair given both model outputs; gradients w.r.t. the outputs
// are filled when `with_grad` is set.
PairTerms pair_terms(std::span<const double> a, std::span<const double> b, double target,
                     const TrainingConfig& config, std::span<const double> weights, bool with_grad) {
    PairTerms t;
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    const double cos = (na > 0.0 && nb > 0.0) ? dot(a, b) / (na * nb) : 0.0;
    const double diff = cos - target;
    t.loss = std::abs(diff) + 0.5 * config.lambda1 * (polarity_regularizer(a) + polarity_regularizer(b)) +
             0.5 * config.lambda2 * (balance_regularizer(a, weights) + balance_regularizer(b, weights));
    if (!with_grad) return t;

    const std::size_t n = a.size();
    t.grad_x.assign(n, 0.0);
    t.grad_y.assign(n, 0.0);
    const double d_align = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    if (na > 0.0 && nb > 0.0 && d_align != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            t.grad_x[i] += d_align * (b[i] / (na * nb) - cos * a[i] / (na * na));
            t.grad_y[i] += d_align * (a[i] / (na * nb) - cos * b[i] / (nb * nb));
        }
    }
    auto add_regularizers = [&](std::span<const double> v, std::vector<double>& g) {
        double weighted_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) weighted_sum += (weights.empty() ? 1.0 : weights[i]) * v[i];
        const double pol_scale = 0.5 * config.lambda1 * 2.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double sign = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
            g[i] += pol_scale * (std::abs(v[i]) - 1.0) * sign;
            g[i] += 0.5 * config.lambda2 * 2.0 * weighted_sum * (weights.empty() ? 1.0 : weights[i]);
        }
    };
    add_regularizers(a, t.grad_x);
    add_regularizers(b, t.grad_y);
    return t;
}

}  // namespace

double total_loss(const WatermarkModel& model, std::span<const TrainingPair> pairs, const TrainingConfig& config,
                  std::span<const double> balance_weights) {
    if (pairs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& pair : pairs) {
        s += pair_terms(model.forward(pair.x), model.forward(pair.y), pair.similarity, config, balance_weights, false)
                 .loss;
    }
    return s / static_cast<double>(pairs.size());
}

double total_loss_gradient(const WatermarkModel& model, std::span<const TrainingPair> pairs,
                           const TrainingConfig& config, std::span<const double> balance_weights,
                           std::vector<DenseLayer>& grads) {
    grads = model.zero_gradients();
    if (pairs.empty()) return 0.0;
    const double inv = 1.0 / static_cast<double>(pairs.size());
    double s = 0.0;
    WatermarkModel::Trace tx;
    WatermarkModel::Trace ty;
    for (const auto& pair : pairs) {
        const auto a = model.forward(pair.x, tx);
        const auto b = model.forward(pair.y, ty);
        auto terms = pair_terms(a, b, pair.similarity, config, balance_weights, true);
        s += terms.loss;
        for (double& g : terms.grad_x) g *= inv;
        for (double& g : terms.grad_y) g *= inv;
        model.backward(tx, terms.grad_x, grads);
        model.backward(ty, terms.grad_y, grads);
    }
    return s * inv;
}

namespace {

class Adam {
public:
    Adam(const WatermarkModel& model, const TrainingConfig& config)
        : config_(config), m_(model.zero_gradients()), v_(model.zero_gradients()) {}

    void step(WatermarkModel& model, const std::vector<DenseLayer>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                          std::vector<double>& v) {
            for (std::size_t i = 0; i < param.size(); ++i) {
                m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
                v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
                param[i] -= config_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.adam_epsilon);
            }
        };
        auto& layers = model.layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            update(layers[l].weight, grads[l].weight, m_[l].weight, v_[l].weight);
            update(layers[l].bias, grads[l].bias, m_[l].bias, v_[l].bias);
        }
    }

private:
    const TrainingConfig& config_;
    std::vector<DenseLayer> m_;
    std::vector<DenseLayer> v_;
    long long t_ = 0;
};

}  // namespace

TrainingResult train(WatermarkModel model, const TrainingConfig& config, std::span<const TrainingPair> data,
                     std::span<const double> balance_weights) {
    config.validate();
    if (data.empty()) throw std::invalid_argument("train: empty training data");

    TrainingResult result;
    result.loss_curve.push_back(total_loss(model, data, config, balance_weights));
    Adam adam(model, config);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng shuffle_rng(derive_seed(config.seed, "train-shuffle"));
    std::vector<TrainingPair> batch;
    std::vector<DenseLayer> grads;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);
        }
        for (std::size_t start = 0, batch_no = 0; start < order.size(); start += config.batch_size, ++batch_no) {
            batch.clear();
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
            const double loss = total_loss_gradient(model, batch, config, balance_weights, grads);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(batch_no));
            }
            adam.step(model, grads);
        }
        const double epoch_loss = total_loss(model, data, config, balance_weights);
        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error("train: non-finite loss after epoch " + std::to_string(epoch));
        }
        result.loss_curve.push_back(epoch_loss);
    }
    result.model = std::move(model);
    return result;
}

namespace {

std::vector<std::string> languages_of(const Vocabulary& vocab) {
    std::set<std::string> langs;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const auto& lang = vocab.language(static_cast<TokenId>(i));
        if (!lang.empty()) langs.insert(lang);
    }
    if (langs.empty()) return {std::string{}};
    return {langs.begin(), langs.end()};
}

}  // namespace

std::vector<TrainingPair> make_training_pairs(const LanguageModel& lm, const Vocabulary& vocab,
                                              const SemanticClustering& clustering,
                                              const EmbeddingProvider& embedder, const PairSamplingConfig& config) {
    if (config.min_len < 1 || config.max_len < config.min_len) {
        throw std::invalid_argument("make_training_pairs: bad prefix length range");
    }
    const auto langs = languages_of(vocab);
    std::vector<std::vector<TokenId>> by_lang;
    for (const auto& lang : langs) {
        auto ids = vocab.tokens_in(lang);
        if (lang.empty()) {
            ids.resize(vocab.size());
            std::iota(ids.begin(), ids.end(), TokenId{0});
        }
        std::erase(ids, kBosId);
        by_lang.push_back(std::move(ids));
    }

    CounterRng rng(derive_seed(config.seed, "training-pairs"));
    auto sample_prefix = [&](std::size_t lang_index) {
        const std::size_t span = config.max_len - config.min_len + 1;
        const std::size_t len = config.min_len + static_cast<std::size_t>(rng.below(span));
        TokenSequence start{{kBosId}, langs[lang_index]};
        GenerationOptions options;
        options.max_len = len;
        options.seed = rng.next();
        return generate(lm, start, options);
    };

    std::vector<TrainingPair> pairs;
    pairs.reserve(config.count);
    for (std::size_t n = 0; n < config.count; ++n) {
        const std::size_t lang_index = static_cast<std::size_t>(rng.below(langs.size()));
        TokenSequence x = sample_prefix(lang_index);
        TokenSequence y;
        const double kind = rng.uniform();
        if (kind < config.translated_share) {
            y = x;
            for (auto& id : y.ids) {
                std::vector<TokenId> mates;
                for (TokenId m : clustering.members(clustering.cluster_index(id))) {
                    if (vocab.language(m) != vocab.language(id)) mates.push_back(m);
                }
                if (!mates.empty()) id = mates[static_cast<std::size_t>(rng.below(mates.size()))];
            }
        } else if (kind < config.translated_share + config.perturbed_share) {
            y = x;
            const auto& pool = by_lang[lang_index];
            const std::size_t edits = 1 + static_cast<std::size_t>(rng.below(3));
            for (std::size_t e = 0; e < edits; ++e) {
                const std::size_t pos = static_cast<std::size_t>(rng.below(y.size()));
                y.ids[pos] = pool[static_cast<std::size_t>(rng.below(pool.size()))];
            }
        } else {
            y = sample_prefix(static_cast<std::size_t>(rng.below(langs.size())));
        }
        TrainingPair pair;
        pair.x = embedder.embed(x);
        pair.y = embedder.embed(y);
        pair.similarity = cosine_similarity(pair.x, pair.y);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::string_view to_string(SirVariant variant) noexcept { return variant == SirVariant::Sir ? "SIR" : "XSIR"; }

SirVariant parse_sir_variant(std::string_view name) {
    if (name == "SIR" || name == "sir") return SirVariant::Sir;
    if (name == "XSIR" || name == "xsir" || name == "X-SIR") return SirVariant::XSir;
    throw std::invalid_argument("unknown SIR variant '" + std::string(name) + "'");
}

void SirArtifact::save(const std::filesystem::path& path) const {
    nlohmann::json doc;
    doc["format"] = "xwm-sir-model-v1";
    doc["variant"] = to_string(variant);
    doc["input_dim"] = model.input_dim();
    doc["output_dim"] = model.output_dim();
    doc["embedding"] = {{"kind", "toy"}, {"dim", embedding.dim}, {"seed", embedding.seed}, {"window", embedding.window}};
    doc["clustering_checksum"] = clustering_checksum;
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (const auto& layer : model.layers()) {
        layers.push_back({{"in", layer.in}, {"out", layer.out}, {"weight", layer.weight}, {"bias", layer.bias}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model artifact " + path.string());
    out << doc.dump() << '\n';
}

SirArtifact SirArtifact::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model artifact " + path.string());
    const auto doc = nlohmann::json::parse(in);
    if (doc.value("format", "") != "xwm-sir-model-v1") {
        throw std::runtime_error(path.string() + ": not an xwm-sir-model-v1 artifact");
    }
    SirArtifact artifact;
    artifact.variant = parse_sir_variant(doc.at("variant").get<std::string>());
    const auto& emb = doc.at("embedding");
    artifact.embedding.dim = emb.at("dim").get<std::size_t>();
    artifact.embedding.seed = emb.at("seed").get<std::uint64_t>();
    artifact.embedding.window = emb.at("window").get<std::size_t>();
    artifact.clustering_checksum = doc.at("clustering_checksum").get<std::string>();

    const auto& layers = doc.at("layers");
    if (layers.empty()) throw std::runtime_error(path.string() + ": model has no layers");
    std::vector<std::size_t> hidden;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) hidden.push_back(layers[l].at("out").get<std::size_t>());
    WatermarkModel model(layers.front().at("in").get<std::size_t>(), layers.back().at("out").get<std::size_t>(),
                         hidden);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& target = model.layers()[l];
        target.weight = layers[l].at("weight").get<std::vector<double>>();
        target.bias = layers[l].at("bias").get<std::vector<double>>();
        if (target.weight.size() != target.in * target.out || target.bias.size() != target.out) {
            throw std::runtime_error(path.string() + ": layer " + std::to_string(l) + " has the wrong shape");
        }
    }
    artifact.model = std::move(model);
    return artifact;
}

}  // namespace xwm
