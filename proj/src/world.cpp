#include "xwm/world.hpp"

#include <array>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

#include "xwm/hashing.hpp"

namespace xwm {

namespace {

constexpr std::array<std::pair<const char*, const char*>, 12> kRealPairs{{
    {"movies", "电影"},
    {"birds", "鸟"},
    {"I", "我"},
    {"watch", "看"},
    {"like", "喜欢"},
    {"book", "书"},
    {"water", "水"},
    {"city", "城市"},
    {"friend", "朋友"},
    {"music", "音乐"},
    {"river", "河"},
    {"night", "夜"},
}};

std::string numbered(const char* prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, n);
    return buf;
}

}  // namespace

SyntheticWorld make_world(const WorldConfig& config) {
    if (config.concepts < kRealPairs.size()) {
        throw std::invalid_argument("make_world: need at least " + std::to_string(kRealPairs.size()) + " concepts");
    }
    if (!(config.synonym_share >= 0.0 && config.synonym_share <= 1.0)) {
        throw std::invalid_argument("make_world: synonym share must lie in [0, 1]");
    }
    CounterRng rng(derive_seed(config.seed, "world"));
    std::vector<std::string> tokens{"<s>"};
    std::vector<std::string> langs{""};
    auto add = [&](std::string token, const char* lang) {
        tokens.push_back(std::move(token));
        langs.emplace_back(lang);
        return tokens.back();
    };

    BilingualDictionary dict;
    dict.source_lang = "en";
    dict.target_lang = "zh";
    for (std::size_t c = 0; c < config.concepts; ++c) {
        const bool real = c < kRealPairs.size();
        const std::string en = add(real ? kRealPairs[c].first : numbered("en_c", c), "en");
        const std::string zh = add(real ? kRealPairs[c].second : numbered("zh_c", c), "zh");
        dict.entries.push_back({en, zh});
        if (real) continue;
        if (rng.uniform() < config.synonym_share) {
            dict.entries.push_back({add(en + "_alt", "en"), zh});
        }
        if (rng.uniform() < config.synonym_share) {
            dict.entries.push_back({en, add(zh + "_alt", "zh")});
        }
    }
    for (std::size_t i = 0; i < config.english_only; ++i) add(numbered("en_only", i), "en");
    for (std::size_t i = 0; i < config.oov_entries; ++i) {
        dict.entries.push_back({numbered("en_missing", i), numbered("zh_missing", i)});
    }
    std::size_t neutral = 0;
    while (neutral < config.neutral || tokens.size() % 4 != 0) add(numbered("sym", neutral++), "");
    return {Vocabulary(std::move(tokens), std::move(langs)), std::move(dict)};
}

std::vector<TokenSequence> make_prompts(const LanguageModel& lm, std::string_view lang, std::size_t count,
                                        std::size_t length, std::uint64_t seed) {
    std::vector<TokenSequence> prompts;
    prompts.reserve(count);
    const std::uint64_t base = derive_seed(seed, "prompts");
    for (std::size_t i = 0; i < count; ++i) {
        TokenSequence start{{kBosId}, std::string(lang)};
        GenerationOptions options;
        options.max_len = length;
        options.seed = hash_combine(base, i);
        auto body = generate(lm, start, options);
        start.ids.insert(start.ids.end(), body.ids.begin(), body.ids.end());
        prompts.push_back(std::move(start));
    }
    return prompts;
}

}  // namespace xwm
