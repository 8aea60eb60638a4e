#pragma once

// Versioned on-disk formats: a JSON manifest line followed by
// length-prefixed little-endian float32 blobs, one per tensor, in a fixed
// order. Values train in f64 and serialize as f32, so save/load/save
// round-trips are byte-stable.

#include <string>
#include <vector>

#include <json.hpp>

#include "dep/tensor.hpp"
#include "dep/toylm.hpp"

namespace dep {

class BlobWriter {
  public:
    explicit BlobWriter(nlohmann::json manifest) : manifest_(std::move(manifest)) {}

    void add(const Tensor& t);
    void add_raw(const std::vector<double>& values);

    // Hash over manifest text (with a zeroed hash field) + payload bytes.
    std::uint64_t content_hash() const;
    void write(const std::string& path);

  private:
    nlohmann::json manifest_;
    std::string payload_;
};

class BlobReader {
  public:
    explicit BlobReader(const std::string& path);

    const nlohmann::json& manifest() const { return manifest_; }
    // Fills the (pre-shaped) tensor from the next blob.
    void read_into(Tensor& t);
    std::vector<double> read_raw();
    bool exhausted() const { return offset_ == payload_.size(); }

  private:
    nlohmann::json manifest_;
    std::string payload_;
    std::size_t offset_ = 0;
};

void save_lm(const LmState& state, const std::string& path);
LmState load_lm(const std::string& path);

}  // namespace dep
