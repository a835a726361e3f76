#include "xwm/kgw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "xwm/hashing.hpp"

namespace xwm {

void KgwConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("KGW gamma must lie in (0, 1)");
    if (!(delta > 0.0)) throw std::invalid_argument("KGW delta must be positive");
    if (hash_window < 1) throw std::invalid_argument("KGW hash window must be >= 1");
}

std::size_t GreenRedPartition::green_count() const noexcept {
    return static_cast<std::size_t>(std::count(green_mask.begin(), green_mask.end(), true));
}

std::uint64_t kgw_context_hash(std::span<const TokenId> prefix, const KgwConfig& config) {
    std::uint64_t min_hash = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t j = 0; j < config.hash_window; ++j) {
        const std::size_t back = config.hash_window - j;
        const TokenId id = prefix.size() >= back ? prefix[prefix.size() - back] : kBosId;
        min_hash = std::min(min_hash, hash_combine(config.hash_key, id));
    }
    return min_hash;
}

namespace {

std::size_t green_list_size(double gamma, std::size_t vocab_size) {
    return static_cast<std::size_t>(std::llround(gamma * static_cast<double>(vocab_size)));
}

// First `count` entries of a seeded permutation of [0, vocab_size).
std::vector<TokenId> green_ids(std::uint64_t context_hash, const KgwConfig& config, std::size_t vocab_size) {
    std::vector<TokenId> perm(vocab_size);
    std::iota(perm.begin(), perm.end(), TokenId{0});
    CounterRng rng(hash_combine(config.hash_key ^ 0x6b67772d70617274ULL, context_hash));
    const std::size_t count = green_list_size(config.gamma, vocab_size);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(vocab_size - i));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(count);
    return perm;
}

}  // namespace

GreenRedPartition kgw_partition(std::span<const TokenId> prefix, const KgwConfig& config, std::size_t vocab_size) {
    config.validate();
    if (vocab_size < 2) throw std::invalid_argument("kgw_partition: vocabulary too small");
    GreenRedPartition partition{std::vector<bool>(vocab_size, false), config.gamma};
    for (TokenId id : green_ids(kgw_context_hash(prefix, config), config, vocab_size)) {
        partition.green_mask[id] = true;
    }
    return partition;
}

std::vector<double> kgw_adjust(std::span<const double> logits, const GreenRedPartition& partition, double delta) {
    if (logits.size() != partition.green_mask.size()) {
        throw std::invalid_argument("kgw_adjust: logits and partition lengths differ");
    }
    std::vector<double> out(logits.begin(), logits.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (partition.green_mask[i]) out[i] += delta;
    }
    return out;
}

double kgw_z_score(std::size_t green, std::size_t scored, double gamma) {
    if (scored == 0) throw std::invalid_argument("kgw_z_score: no scored tokens");
    const double t = static_cast<double>(scored);
    return (static_cast<double>(green) - gamma * t) / std::sqrt(t * gamma * (1.0 - gamma));
}

std::size_t kgw_green_count(const TokenSequence& text, const KgwConfig& config, std::size_t vocab_size) {
    config.validate();
    if (text.size() <= config.hash_window) {
        throw std::invalid_argument("kgw_score: text must be longer than the hash window");
    }
    std::size_t green = 0;
    const std::span<const TokenId> ids(text.ids);
    for (std::size_t i = config.hash_window; i < ids.size(); ++i) {
        if (ids[i] >= vocab_size) throw std::out_of_range("kgw_score: token id outside vocabulary");
        const auto list = green_ids(kgw_context_hash(ids.first(i), config), config, vocab_size);
        if (std::find(list.begin(), list.end(), ids[i]) != list.end()) ++green;
    }
    return green;
}

StrengthScore kgw_score(const TokenSequence& text, const KgwConfig& config, std::size_t vocab_size) {
    const std::size_t green = kgw_green_count(text, config, vocab_size);
    const std::size_t scored = text.size() - config.hash_window;
    return {kgw_z_score(green, scored, config.gamma), Scheme::KgwZ, scored};
}

KgwEngine::KgwEngine(KgwConfig config, std::size_t vocab_size) : config_(config), vocab_size_(vocab_size) {
    config_.validate();
}

std::vector<double> KgwEngine::adjust(const TokenSequence& prefix, std::vector<double> logits) const {
    return kgw_adjust(logits, kgw_partition(prefix.ids, config_, vocab_size_), config_.delta);
}

StrengthScore KgwEngine::score(const TokenSequence& text, std::span<const TokenId>) const {
    return kgw_score(text, config_, vocab_size_);
}

}  // namespace xwm
