#include "xwm/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "xwm/hashing.hpp"
#include "xwm/watermark.hpp"

namespace xwm {

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::string> languages)
    : tokens_(std::move(tokens)), languages_(std::move(languages)) {
    if (tokens_.size() < 2) {
        throw std::invalid_argument("vocabulary needs at least two tokens");
    }
    if (languages_.empty()) {
        languages_.resize(tokens_.size());
    } else if (languages_.size() != tokens_.size()) {
        throw std::invalid_argument("vocabulary: language tags not aligned with tokens");
    }
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) {
            throw std::invalid_argument("vocabulary: empty token at line " + std::to_string(i + 1));
        }
        if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
            throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[i] + "'");
        }
    }
}

const std::string& Vocabulary::token(TokenId id) const { return tokens_.at(id); }

const std::string& Vocabulary::language(TokenId id) const { return languages_.at(id); }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<TokenId> Vocabulary::tokens_in(std::string_view lang) const {
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < languages_.size(); ++i) {
        if (languages_[i] == lang) out.push_back(static_cast<TokenId>(i));
    }
    return out;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file " + path.string());
    std::vector<std::string> tokens;
    std::vector<std::string> langs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            tokens.push_back(line);
            langs.emplace_back();
        } else {
            tokens.push_back(line.substr(0, tab));
            langs.push_back(line.substr(tab + 1));
        }
    }
    return Vocabulary(std::move(tokens), std::move(langs));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        out << tokens_[i];
        if (!languages_[i].empty()) out << '\t' << languages_[i];
        out << '\n';
    }
}

void validate(const TokenSequence& seq, const Vocabulary& vocab) {
    for (TokenId id : seq.ids) {
        if (!vocab.contains(id)) {
            throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                                    std::to_string(vocab.size()));
        }
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    double max = -std::numeric_limits<double>::infinity();
    for (double z : logits) {
        if (!std::isfinite(z)) throw std::invalid_argument("softmax: non-finite logit");
        max = std::max(max, z);
    }
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

TokenId sample_multinomial(std::span<const double> probs, std::mt19937_64& rng) {
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("sample_multinomial: invalid probability");
        total += p;
    }
    if (!(total > 0.0)) throw std::invalid_argument("sample_multinomial: probabilities sum to zero");

    const double u = to_unit_interval(rng()) * total;
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = i;
        cumulative += probs[i];
        if (u < cumulative) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(last_positive);
}

ToyLm::ToyLm(std::shared_ptr<const Vocabulary> vocab, ToyLmConfig config)
    : vocab_(std::move(vocab)), config_(config) {
    if (!vocab_) throw std::invalid_argument("ToyLm needs a vocabulary");
    if (config_.order < 1) throw std::invalid_argument("ToyLm order must be >= 1");
}

std::vector<double> ToyLm::next_logits(const TokenSequence& prefix) const {
    const std::size_t context_len = static_cast<std::size_t>(config_.order - 1);
    std::uint64_t context = hash_combine(config_.seed, 0x746f796c6dULL);
    for (std::size_t j = 0; j < context_len; ++j) {
        // Left-pad with BOS when the prefix is shorter than the context.
        const std::size_t back = context_len - j;
        const TokenId id = prefix.ids.size() >= back ? prefix.ids[prefix.ids.size() - back] : kBosId;
        context = hash_combine(context, id);
    }

    const std::size_t n = vocab_->size();
    std::vector<double> logits(n);
    for (std::size_t v = 0; v < n; ++v) {
        const std::string& lang = vocab_->language(static_cast<TokenId>(v));
        const bool off_language = !prefix.language.empty() && !lang.empty() && lang != prefix.language;
        if (v == kBosId || off_language) {
            logits[v] = -kLogitBound;
            continue;
        }
        const double u = to_unit_interval(hash_combine(context, v));
        logits[v] = -kLogitBound + 2.0 * kLogitBound * u;
    }
    return logits;
}

TokenSequence generate(const LanguageModel& model, const TokenSequence& prompt, const GenerationOptions& options,
                       const WatermarkEngine* engine) {
    if (prompt.empty()) throw std::invalid_argument("generate: empty prompt");
    if (options.max_len < 1) throw std::invalid_argument("generate: max_len must be >= 1");

    std::mt19937_64 rng(options.seed);
    TokenSequence prefix = prompt;
    prefix.ids.reserve(prompt.size() + options.max_len);
    TokenSequence response{{}, prompt.language};
    response.ids.reserve(options.max_len);

    for (std::size_t step = 0; step < options.max_len; ++step) {
        std::vector<double> logits = model.next_logits(prefix);
        if (engine) logits = engine->adjust(prefix, std::move(logits));
        const std::vector<double> probs = softmax(logits);
        // Draw unconditionally so the RNG stream does not depend on the engine.
        const TokenId sampled = sample_multinomial(probs, rng);
        TokenId next = sampled;
        if (engine) {
            if (auto chosen = engine->select(prefix, probs)) next = *chosen;
        }
        prefix.ids.push_back(next);
        response.ids.push_back(next);
        if (options.stop_token && next == *options.stop_token) break;
    }
    return response;
}

}  // namespace xwm
