#include "dep/diffrep.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "dep/hash.hpp"

namespace dep {

std::vector<double> user_specific(const EmbedderSpec& spec, const Review& review) {
    return embed_text(spec, review.text);
}

std::vector<double> difference(const std::vector<double>& e_his,
                               const std::vector<std::vector<double>>& peer_embeddings) {
    std::vector<double> out(e_his.size(), 0.0);
    if (peer_embeddings.empty()) return out;
    for (const auto& peer : peer_embeddings) {
        if (peer.size() != e_his.size()) {
            throw std::invalid_argument("difference: peer embedding length mismatch");
        }
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += e_his[i] - peer[i];
    }
    const double inv = 1.0 / static_cast<double>(peer_embeddings.size());
    for (double& v : out) v *= inv;
    return out;
}

std::vector<DiffRepresentation> build_all(const Corpus& corpus, const EmbedderSpec& spec,
                                          const std::string& user_id,
                                          const std::string& target_item,
                                          const DiffRepOptions& options, EmbedCache* cache) {
    RetrievedHistory history = corpus.retrieve_recent(user_id, target_item, options.k);
    std::vector<DiffRepresentation> out;
    out.reserve(history.size());
    auto embed = [&](const std::string& text) -> std::vector<double> {
        if (cache) return cache->get(text);
        return embed_text(spec, text);
    };
    for (const Review& h : history) {
        DiffRepresentation rep;
        rep.item_id = h.item_id;
        rep.e_his = embed(h.text);
        std::optional<std::int64_t> before;
        if (options.peers_before_target) before = h.timestamp;
        std::vector<Review> peer_reviews = corpus.peers(h.item_id, user_id, options.m_max, before);
        std::vector<std::vector<double>> peer_embeddings;
        peer_embeddings.reserve(peer_reviews.size());
        for (const Review& p : peer_reviews) peer_embeddings.push_back(embed(p.text));
        rep.peer_count = static_cast<int>(peer_embeddings.size());
        rep.e_diff = difference(rep.e_his, peer_embeddings);
        out.push_back(std::move(rep));
    }
    return out;
}

void save_diffrep_file(const DiffRepFile& file, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("diffrep cache: cannot write " + path);
    nlohmann::json manifest{{"format", "DEPDR"},
                            {"version", 1},
                            {"corpus_hash", to_hex(file.corpus_hash)},
                            {"embedder_hash", to_hex(file.embedder_hash)},
                            {"dim", file.dim},
                            {"instances", file.instances.size()}};
    f << manifest.dump() << "\n";
    auto put_f32 = [&f](double v) {
        float x = static_cast<float>(v);
        f.write(reinterpret_cast<const char*>(&x), sizeof x);
    };
    auto put_i32 = [&f](int v) { f.write(reinterpret_cast<const char*>(&v), sizeof v); };
    for (const auto& inst : file.instances) {
        put_i32(static_cast<int>(inst.size()));
        for (const auto& rep : inst) {
            put_i32(static_cast<int>(rep.item_id.size()));
            f.write(rep.item_id.data(), static_cast<std::streamsize>(rep.item_id.size()));
            put_i32(rep.peer_count);
            for (double v : rep.e_his) put_f32(v);
            for (double v : rep.e_diff) put_f32(v);
        }
    }
}

DiffRepFile load_diffrep_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("diffrep cache: cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("diffrep cache: empty file");
    nlohmann::json manifest = nlohmann::json::parse(line);
    if (manifest.value("format", std::string()) != "DEPDR" || manifest.value("version", 0) != 1) {
        throw std::runtime_error("diffrep cache: unsupported format");
    }
    DiffRepFile out;
    out.corpus_hash = std::stoull(manifest.at("corpus_hash").get<std::string>(), nullptr, 16);
    out.embedder_hash = std::stoull(manifest.at("embedder_hash").get<std::string>(), nullptr, 16);
    out.dim = manifest.at("dim").get<int>();
    const std::size_t count = manifest.at("instances").get<std::size_t>();
    auto get_i32 = [&f]() {
        int v = 0;
        f.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    };
    auto get_f32 = [&f]() {
        float v = 0;
        f.read(reinterpret_cast<char*>(&v), sizeof v);
        return static_cast<double>(v);
    };
    out.instances.resize(count);
    for (auto& inst : out.instances) {
        const int n = get_i32();
        inst.resize(static_cast<std::size_t>(n));
        for (auto& rep : inst) {
            const int id_len = get_i32();
            rep.item_id.resize(static_cast<std::size_t>(id_len));
            f.read(rep.item_id.data(), id_len);
            rep.peer_count = get_i32();
            rep.e_his.resize(static_cast<std::size_t>(out.dim));
            rep.e_diff.resize(static_cast<std::size_t>(out.dim));
            for (double& v : rep.e_his) v = get_f32();
            for (double& v : rep.e_diff) v = get_f32();
        }
        if (!f) throw std::runtime_error("diffrep cache: truncated payload");
    }
    return out;
}

}  // namespace dep
