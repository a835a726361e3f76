#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xwm/lm.hpp"
#include "xwm/watermark.hpp"

namespace xwm {

/// One line of a corpus JSONL file. Attack outputs fill the optional fields.
struct CorpusRecord {
    std::string id;
    TokenSequence prompt;
    TokenSequence response;
    std::optional<TokenSequence> pivot_prompt;
    std::optional<TokenSequence> pivot_response;
    std::optional<TokenSequence> attacked_response;
    std::optional<std::string> attack;
    std::optional<std::string> failed_stage;
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// One line of a detection JSONL file.
struct ScoreRecord {
    std::string id;
    StrengthScore score;
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// Throws std::runtime_error naming the file and line on malformed input.
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& records);

/// Prompt file: one `{"id", "prompt": [ids], "language"}` object per line.
std::vector<CorpusRecord> read_prompts(const std::filesystem::path& path);
void write_prompts(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);

}  // namespace xwm
