#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "xwm/clustering.hpp"
#include "xwm/lm.hpp"

namespace xwm {

/// Shape of a synthetic English/Chinese world: concepts each get one token
/// per language, some get a second synonym on either side, a few exist in
/// English only, and language-neutral tokens are shared by both.
struct WorldConfig {
    std::size_t concepts = 120;
    double synonym_share = 0.3;
    std::size_t english_only = 6;
    std::size_t neutral = 8;
    /// Dictionary entries naming tokens that are not in the vocabulary.
    std::size_t oov_entries = 5;
    std::uint64_t seed = 17;
};

struct SyntheticWorld {
    Vocabulary vocab;
    BilingualDictionary dictionary;
};

/// Token 0 is "<s>". The first concepts are real word pairs (movies/电影,
/// birds/鸟, I/我, watch/看, ...); the rest are named en_cNNN / zh_cNNN.
/// Neutral tokens are padded so the vocabulary size is a multiple of four.
SyntheticWorld make_world(const WorldConfig& config);

/// Prompts of `length` tokens after a leading BOS, sampled from `lm` in
/// language `lang`. Prompt i depends only on (seed, i).
std::vector<TokenSequence> make_prompts(const LanguageModel& lm, std::string_view lang, std::size_t count,
                                        std::size_t length, std::uint64_t seed);

}  // namespace xwm
