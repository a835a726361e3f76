#include "xwm/clustering.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "xwm/hashing.hpp"

namespace xwm {

void BilingualDictionary::deduplicate() {
    std::set<DictionaryEntry> seen;
    std::vector<DictionaryEntry> unique;
    unique.reserve(entries.size());
    for (auto& e : entries) {
        if (seen.insert(e).second) unique.push_back(std::move(e));
    }
    entries = std::move(unique);
}

BilingualDictionary BilingualDictionary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dictionary file " + path.string());
    BilingualDictionary dict;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
            line.find('\t', tab + 1) != std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 'source<TAB>target'");
        }
        dict.entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    dict.deduplicate();
    return dict;
}

void BilingualDictionary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dictionary file " + path.string());
    if (!source_lang.empty() || !target_lang.empty()) {
        out << "# " << source_lang << '\t' << target_lang << '\n';
    }
    for (const auto& e : entries) out << e.source << '\t' << e.target << '\n';
}

DictionaryGraph build_graph(const Vocabulary& vocab, const BilingualDictionary& dict) {
    DictionaryGraph graph;
    for (const auto& entry : dict.entries) {
        const auto a = vocab.find(entry.source);
        const auto b = vocab.find(entry.target);
        if (!a || !b) {
            ++graph.skipped_entries;
            continue;
        }
        graph.edges.emplace_back(*a, *b);
    }
    return graph;
}

SemanticClustering::SemanticClustering(std::vector<std::uint32_t> cluster_of, std::size_t num_clusters)
    : cluster_of_(std::move(cluster_of)), members_(num_clusters) {
    for (std::size_t token = 0; token < cluster_of_.size(); ++token) {
        const auto c = cluster_of_[token];
        if (c >= num_clusters) throw std::invalid_argument("clustering: cluster id out of range");
        members_[c].push_back(static_cast<TokenId>(token));
    }
    for (const auto& m : members_) {
        if (m.empty()) throw std::invalid_argument("clustering: cluster ids are not dense");
    }
}

SemanticClustering SemanticClustering::singletons(std::size_t vocab_size) {
    std::vector<std::uint32_t> ids(vocab_size);
    std::iota(ids.begin(), ids.end(), 0U);
    return SemanticClustering(std::move(ids), vocab_size);
}

std::uint32_t SemanticClustering::cluster_index(TokenId token) const {
    if (token >= cluster_of_.size()) {
        throw std::out_of_range("cluster_index: token " + std::to_string(token) + " outside clustering");
    }
    return cluster_of_[token];
}

std::vector<double> SemanticClustering::cluster_sizes() const {
    std::vector<double> sizes(members_.size());
    for (std::size_t c = 0; c < members_.size(); ++c) sizes[c] = static_cast<double>(members_[c].size());
    return sizes;
}

std::uint64_t SemanticClustering::checksum() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    feed(members_.size());
    for (auto c : cluster_of_) feed(c);
    return h;
}

SemanticClustering SemanticClustering::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open clustering file " + path.string());
    const auto doc = nlohmann::json::parse(in);
    return SemanticClustering(doc.at("cluster_of").get<std::vector<std::uint32_t>>(),
                              doc.at("num_clusters").get<std::size_t>());
}

void SemanticClustering::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write clustering file " + path.string());
    nlohmann::json doc;
    doc["num_clusters"] = num_clusters();
    doc["cluster_of"] = cluster_of_;
    doc["checksum"] = to_hex(checksum());
    out << doc.dump() << '\n';
}

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<unsigned> rank_;
};

}  // namespace

SemanticClustering connected_components(std::size_t vocab_size, std::span<const Edge> edges) {
    DisjointSets sets(vocab_size);
    for (const auto& [a, b] : edges) {
        if (a >= vocab_size || b >= vocab_size) throw std::out_of_range("connected_components: edge outside vocabulary");
        sets.unite(a, b);
    }
    // Scanning tokens in id order numbers clusters by their smallest member.
    constexpr auto kUnassigned = static_cast<std::uint32_t>(-1);
    std::vector<std::uint32_t> root_label(vocab_size, kUnassigned);
    std::vector<std::uint32_t> cluster_of(vocab_size);
    std::uint32_t next = 0;
    for (std::size_t token = 0; token < vocab_size; ++token) {
        auto& label = root_label[sets.find(token)];
        if (label == kUnassigned) label = next++;
        cluster_of[token] = label;
    }
    return SemanticClustering(std::move(cluster_of), next);
}

SemanticClustering build_clustering(const Vocabulary& vocab, const BilingualDictionary& dict,
                                    std::size_t* skipped_entries) {
    const auto graph = build_graph(vocab, dict);
    if (skipped_entries) *skipped_entries = graph.skipped_entries;
    return connected_components(vocab.size(), graph.edges);
}

}  // namespace xwm
