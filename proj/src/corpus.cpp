#include "xwm/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace xwm {

namespace {

using nlohmann::json;

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn fn) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            fn(json::parse(line));
        } catch (const json::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

TokenSequence sequence(const json& ids, const std::string& language) {
    return {ids.get<std::vector<TokenId>>(), language};
}

void put_optional(json& doc, const char* key, const std::optional<TokenSequence>& seq) {
    if (seq) doc[key] = seq->ids;
}

}  // namespace

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path) {
    std::vector<CorpusRecord> records;
    for_each_line(path, [&](const json& doc) {
        CorpusRecord r;
        r.id = doc.at("id").get<std::string>();
        const auto language = doc.at("language").get<std::string>();
        r.prompt = sequence(doc.at("prompt"), language);
        r.response = sequence(doc.at("response"), language);
        const auto pivot = doc.value("pivot_language", std::string{});
        if (doc.contains("pivot_prompt")) r.pivot_prompt = sequence(doc["pivot_prompt"], pivot);
        if (doc.contains("pivot_response")) r.pivot_response = sequence(doc["pivot_response"], pivot);
        if (doc.contains("attacked_response")) r.attacked_response = sequence(doc["attacked_response"], language);
        if (doc.contains("attack")) r.attack = doc["attack"].get<std::string>();
        if (doc.contains("failed_stage")) r.failed_stage = doc["failed_stage"].get<std::string>();
        r.config_hash = doc.value("config_hash", std::string{});
        r.seed = doc.value("seed", std::uint64_t{0});
        records.push_back(std::move(r));
    });
    return records;
}

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records) {
    auto out = open_out(path);
    for (const auto& r : records) {
        json doc;
        doc["id"] = r.id;
        doc["language"] = r.prompt.language;
        doc["prompt"] = r.prompt.ids;
        doc["response"] = r.response.ids;
        if (r.attack) doc["attack"] = *r.attack;
        if (r.pivot_prompt || r.pivot_response) {
            doc["pivot_language"] = r.pivot_prompt ? r.pivot_prompt->language : r.pivot_response->language;
        }
        put_optional(doc, "pivot_prompt", r.pivot_prompt);
        put_optional(doc, "pivot_response", r.pivot_response);
        put_optional(doc, "attacked_response", r.attacked_response);
        if (r.failed_stage) doc["failed_stage"] = *r.failed_stage;
        doc["config_hash"] = r.config_hash;
        doc["seed"] = r.seed;
        out << doc.dump() << '\n';
    }
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) {
    std::vector<ScoreRecord> records;
    for_each_line(path, [&](const json& doc) {
        ScoreRecord r;
        r.id = doc.at("id").get<std::string>();
        r.score.value = doc.at("score").get<double>();
        r.score.scheme = parse_scheme(doc.at("scheme").get<std::string>());
        r.score.token_count = doc.at("token_count").get<std::size_t>();
        r.config_hash = doc.value("config_hash", std::string{});
        r.seed = doc.value("seed", std::uint64_t{0});
        records.push_back(std::move(r));
    });
    return records;
}

void write_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& records) {
    auto out = open_out(path);
    for (const auto& r : records) {
        json doc;
        doc["id"] = r.id;
        doc["score"] = r.score.value;
        doc["scheme"] = to_string(r.score.scheme);
        doc["token_count"] = r.score.token_count;
        doc["config_hash"] = r.config_hash;
        doc["seed"] = r.seed;
        out << doc.dump() << '\n';
    }
}

std::vector<CorpusRecord> read_prompts(const std::filesystem::path& path) {
    std::vector<CorpusRecord> records;
    for_each_line(path, [&](const json& doc) {
        CorpusRecord r;
        r.id = doc.at("id").get<std::string>();
        r.prompt = sequence(doc.at("prompt"), doc.at("language").get<std::string>());
        records.push_back(std::move(r));
    });
    return records;
}

void write_prompts(const std::filesystem::path& path, const std::vector<CorpusRecord>& records) {
    auto out = open_out(path);
    for (const auto& r : records) {
        out << json{{"id", r.id}, {"language", r.prompt.language}, {"prompt", r.prompt.ids}}.dump() << '\n';
    }
}

}  // namespace xwm
