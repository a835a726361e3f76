#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xwm/lm.hpp"

namespace xwm {

struct DictionaryEntry {
    std::string source;
    std::string target;
    friend auto operator<=>(const DictionaryEntry&, const DictionaryEntry&) = default;
};

struct BilingualDictionary {
    std::vector<DictionaryEntry> entries;
    std::string source_lang;
    std::string target_lang;

    /// Drops exact duplicate entries, keeping first-seen order.
    void deduplicate();

    /// UTF-8 TSV, one `source<TAB>target` per line. Blank lines and lines
    /// starting with `#` are ignored. Throws std::runtime_error on malformed
    /// lines.
    static BilingualDictionary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

using Edge = std::pair<TokenId, TokenId>;

struct DictionaryGraph {
    std::vector<Edge> edges;
    /// Entries with at least one side absent from the vocabulary.
    std::size_t skipped_entries = 0;
};

/// One edge per dictionary entry whose two sides are both whole tokens of the
/// vocabulary (exact string match).
DictionaryGraph build_graph(const Vocabulary& vocab, const BilingualDictionary& dict);

class SemanticClustering {
public:
    SemanticClustering() = default;
    /// Throws std::invalid_argument unless ids are dense in [0, num_clusters).
    SemanticClustering(std::vector<std::uint32_t> cluster_of, std::size_t num_clusters);

    static SemanticClustering singletons(std::size_t vocab_size);

    std::size_t vocab_size() const noexcept { return cluster_of_.size(); }
    std::size_t num_clusters() const noexcept { return members_.size(); }

    /// C(i). Throws std::out_of_range for an id outside the vocabulary.
    std::uint32_t cluster_index(TokenId token) const;
    std::span<const TokenId> members(std::uint32_t cluster) const { return members_.at(cluster); }
    std::span<const std::uint32_t> assignments() const noexcept { return cluster_of_; }
    std::vector<double> cluster_sizes() const;

    /// FNV-1a over the assignment vector, used to bind trained models and
    /// engine configs to the clustering they were built against.
    std::uint64_t checksum() const noexcept;

    /// `{"num_clusters": int, "cluster_of": [int]}`.
    static SemanticClustering load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    friend bool operator==(const SemanticClustering& a, const SemanticClustering& b) {
        return a.cluster_of_ == b.cluster_of_;
    }

private:
    std::vector<std::uint32_t> cluster_of_;
    std::vector<std::vector<TokenId>> members_;
};

/// Connected components via union-find. Cluster ids are canonical: clusters
/// are numbered in order of their smallest member. Throws std::out_of_range on
/// an edge endpoint outside [0, vocab_size).
SemanticClustering connected_components(std::size_t vocab_size, std::span<const Edge> edges);

/// build_graph followed by connected_components.
SemanticClustering build_clustering(const Vocabulary& vocab, const BilingualDictionary& dict,
                                    std::size_t* skipped_entries = nullptr);

}  // namespace xwm
