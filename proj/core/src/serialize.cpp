#include "dep/serialize.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dep/hash.hpp"

namespace dep {

namespace {

void append_f32(std::string& out, const std::vector<double>& values) {
    std::uint32_t len = static_cast<std::uint32_t>(values.size());
    out.append(reinterpret_cast<const char*>(&len), sizeof len);
    for (double v : values) {
        float f = static_cast<float>(v);
        out.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
}

std::vector<double> take_f32(const std::string& payload, std::size_t& offset) {
    if (offset + sizeof(std::uint32_t) > payload.size()) {
        throw std::runtime_error("blob file: truncated length prefix");
    }
    std::uint32_t len = 0;
    std::memcpy(&len, payload.data() + offset, sizeof len);
    offset += sizeof len;
    if (offset + static_cast<std::size_t>(len) * sizeof(float) > payload.size()) {
        throw std::runtime_error("blob file: truncated payload");
    }
    std::vector<double> out(len);
    for (std::uint32_t i = 0; i < len; ++i) {
        float f = 0;
        std::memcpy(&f, payload.data() + offset, sizeof f);
        offset += sizeof f;
        out[i] = static_cast<double>(f);
    }
    return out;
}

}  // namespace

void BlobWriter::add(const Tensor& t) {
    add_raw(std::vector<double>(t.data().begin(), t.data().end()));
}

void BlobWriter::add_raw(const std::vector<double>& values) { append_f32(payload_, values); }

std::uint64_t BlobWriter::content_hash() const {
    nlohmann::json m = manifest_;
    m["content_hash"] = "";
    HashAccumulator h;
    h.update(m.dump());
    h.update(payload_);
    return h.digest();
}

void BlobWriter::write(const std::string& path) {
    manifest_["content_hash"] = to_hex(content_hash());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("blob file: cannot write " + path);
    f << manifest_.dump() << "\n";
    f.write(payload_.data(), static_cast<std::streamsize>(payload_.size()));
}

BlobReader::BlobReader(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("blob file: cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("blob file: missing manifest");
    manifest_ = nlohmann::json::parse(line);
    std::ostringstream buf;
    buf << f.rdbuf();
    payload_ = buf.str();
}

void BlobReader::read_into(Tensor& t) {
    std::vector<double> values = take_f32(payload_, offset_);
    if (values.size() != t.numel()) {
        throw std::runtime_error("blob file: tensor size mismatch");
    }
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
}

std::vector<double> BlobReader::read_raw() { return take_f32(payload_, offset_); }

void save_lm(const LmState& state, const std::string& path) {
    nlohmann::json manifest{{"format", "DEPLM"},
                            {"version", 1},
                            {"d_lm", state.config.d_lm},
                            {"layers", state.config.layers},
                            {"heads", state.config.heads},
                            {"context", state.config.context},
                            {"seed", state.config.seed},
                            {"param_hash", to_hex(lm_param_hash(state))}};
    BlobWriter w(std::move(manifest));
    for (const Tensor& t : state.parameters()) w.add(t);
    w.write(path);
}

LmState load_lm(const std::string& path) {
    BlobReader r(path);
    const nlohmann::json& m = r.manifest();
    if (m.value("format", std::string()) != "DEPLM" || m.value("version", 0) != 1) {
        throw std::runtime_error("lm file: unsupported format");
    }
    LmConfig config;
    config.d_lm = m.at("d_lm").get<int>();
    config.layers = m.at("layers").get<int>();
    config.heads = m.at("heads").get<int>();
    config.context = m.at("context").get<int>();
    config.seed = m.at("seed").get<std::uint64_t>();
    LmState state = make_lm(config);
    for (Tensor t : state.parameters()) r.read_into(t);
    return state;
}

}  // namespace dep
