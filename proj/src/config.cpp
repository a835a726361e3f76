#include "xwm/config.hpp"

#include "xwm/hashing.hpp"

namespace xwm {

namespace {

template <typename T>
void read_into(const nlohmann::json& doc, const char* key, T& target) {
    if (doc.contains(key)) target = doc.at(key).get<T>();
}

}  // namespace

EngineSpec parse_engine_spec(const nlohmann::json& doc) {
    EngineSpec spec;
    read_into(doc, "scheme", spec.scheme);
    if (spec.scheme != "none" && spec.scheme != "KGW" && spec.scheme != "UW" && spec.scheme != "SIR" &&
        spec.scheme != "XSIR") {
        throw std::invalid_argument("unknown engine scheme '" + spec.scheme + "' (expected KGW, UW, SIR, XSIR or none)");
    }
    if (doc.contains("kgw")) {
        const auto& k = doc["kgw"];
        read_into(k, "gamma", spec.kgw.gamma);
        read_into(k, "delta", spec.kgw.delta);
        read_into(k, "hash_window", spec.kgw.hash_window);
        read_into(k, "hash_key", spec.kgw.hash_key);
    }
    if (doc.contains("uw")) {
        const auto& u = doc["uw"];
        read_into(u, "hash_window", spec.uw.hash_window);
        read_into(u, "tv_bound", spec.uw.tv_bound);
        read_into(u, "zero_probability_floor", spec.uw.zero_probability_floor);
        read_into(u, "hash_key", spec.uw.hash_key);
    }
    if (doc.contains("sir")) {
        const auto& s = doc["sir"];
        read_into(s, "scale", spec.sir.scale);
        if (s.contains("model")) spec.model_path = s["model"].get<std::string>();
        if (s.contains("clustering")) spec.clustering_path = s["clustering"].get<std::string>();
    }
    spec.kgw.validate();
    spec.uw.validate();
    if ((spec.scheme == "SIR" || spec.scheme == "XSIR") && (spec.model_path.empty() || spec.clustering_path.empty())) {
        throw std::invalid_argument("engine " + spec.scheme + " needs sir.model and sir.clustering");
    }
    return spec;
}

std::shared_ptr<const WatermarkEngine> build_engine(const EngineSpec& spec, const Vocabulary& vocab,
                                                    std::shared_ptr<const LanguageModel> lm) {
    if (spec.scheme == "none") return nullptr;
    if (spec.scheme == "KGW") return std::make_shared<KgwEngine>(spec.kgw, vocab.size());
    if (spec.scheme == "UW") return std::make_shared<UwEngine>(spec.uw, std::move(lm));

    auto artifact = SirArtifact::load(spec.model_path);
    auto clustering = std::make_shared<const SemanticClustering>(SemanticClustering::load(spec.clustering_path));
    const auto actual = to_hex(clustering->checksum());
    if (artifact.clustering_checksum != actual) {
        throw ChecksumMismatch("model " + spec.model_path.string() + " was trained on clustering " +
                               artifact.clustering_checksum + " but " + spec.clustering_path.string() + " has checksum " +
                               actual);
    }
    const auto wanted = spec.scheme == "XSIR" ? SirVariant::XSir : SirVariant::Sir;
    if (artifact.variant != wanted) {
        throw ChecksumMismatch("engine scheme " + spec.scheme + " given a " + std::string(to_string(artifact.variant)) +
                               " model");
    }
    if (clustering->vocab_size() != vocab.size()) {
        throw std::invalid_argument("clustering covers " + std::to_string(clustering->vocab_size()) +
                                    " tokens but the vocabulary has " + std::to_string(vocab.size()));
    }
    auto embedder = std::make_shared<const ToyEmbedding>(clustering, artifact.embedding);
    auto model = std::make_shared<const WatermarkModel>(std::move(artifact.model));
    if (wanted == SirVariant::XSir) return std::make_shared<SirEngine>(spec.sir, embedder, model, clustering);
    if (model->output_dim() != vocab.size()) {
        throw std::invalid_argument("SIR model output width differs from the vocabulary size");
    }
    return std::make_shared<SirEngine>(spec.sir, embedder, model);
}

ToyLmConfig parse_lm_config(const nlohmann::json& doc) {
    ToyLmConfig config;
    read_into(doc, "order", config.order);
    read_into(doc, "seed", config.seed);
    return config;
}

std::string config_hash(const nlohmann::json& doc) { return to_hex(fnv1a64(doc.dump())); }

}  // namespace xwm
