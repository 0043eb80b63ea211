#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "aap/core/rng.hpp"
#include "aap/core/tensor.hpp"

namespace aap::io {

// Checkpoint container: a text manifest (version, step count, the effective
// run config and its hash, ordered key/value blobs) followed by one flat
// little-endian float32 payload indexed by named arrays. Writing the same
// state twice produces identical bytes.
class CheckpointWriter {
 public:
  void set_steps(int64_t steps) { steps_ = steps; }
  void set_config(std::string config_text) { config_ = std::move(config_text); }

  void add_kv(const std::string& key, const std::string& value) { kv_.emplace_back(key, value); }

  void add_array(const std::string& name, const Tensor& t) {
    Entry e;
    e.name = name;
    e.shape = t.shape();
    e.offset = static_cast<int64_t>(payload_.size());
    payload_.insert(payload_.end(), t.data().begin(), t.data().end());
    arrays_.push_back(std::move(e));
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    out << "aap-checkpoint v1\n";
    out << "steps " << steps_ << "\n";
    out << "config_hash " << std::hex << Rng::hash64(config_) << std::dec << "\n";
    out << "config_bytes " << config_.size() << "\n";
    out.write(config_.data(), static_cast<std::streamsize>(config_.size()));
    out << "\nkv " << kv_.size() << "\n";
    for (const auto& [k, v] : kv_) {
      out << k << " " << v.size() << "\n";
      out.write(v.data(), static_cast<std::streamsize>(v.size()));
      out << "\n";
    }
    out << "arrays " << arrays_.size() << "\n";
    for (const auto& e : arrays_) {
      out << e.name << " " << e.shape.size();
      for (int64_t d : e.shape) out << " " << d;
      out << " " << e.offset << "\n";
    }
    out << "payload_bytes " << payload_.size() * 4 << "\n";
    std::vector<unsigned char> bytes(payload_.size() * 4);
    for (size_t i = 0; i < payload_.size(); ++i) {
      uint32_t bits;
      std::memcpy(&bits, &payload_[i], 4);
      bytes[4 * i + 0] = bits & 0xFF;
      bytes[4 * i + 1] = (bits >> 8) & 0xFF;
      bytes[4 * i + 2] = (bits >> 16) & 0xFF;
      bytes[4 * i + 3] = (bits >> 24) & 0xFF;
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
  }

 private:
  struct Entry {
    std::string name;
    std::vector<int64_t> shape;
    int64_t offset = 0;
  };
  int64_t steps_ = 0;
  std::string config_;
  std::vector<std::pair<std::string, std::string>> kv_;
  std::vector<Entry> arrays_;
  std::vector<float> payload_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    std::string magic;
    std::getline(in, magic);
    if (magic != "aap-checkpoint v1")
      throw std::runtime_error("checkpoint: bad magic in " + path);
    expect(in, "steps") >> steps_;
    in.ignore();
    std::string hash_hex;
    expect(in, "config_hash") >> hash_hex;
    in.ignore();
    config_hash_ = std::stoull(hash_hex, nullptr, 16);
    size_t clen = 0;
    expect(in, "config_bytes") >> clen;
    in.ignore();
    config_.resize(clen);
    in.read(config_.data(), static_cast<std::streamsize>(clen));
    in.ignore();
    size_t nkv = 0;
    expect(in, "kv") >> nkv;
    in.ignore();
    for (size_t i = 0; i < nkv; ++i) {
      std::string key;
      size_t len = 0;
      in >> key >> len;
      in.ignore();
      std::string val(len, '\0');
      in.read(val.data(), static_cast<std::streamsize>(len));
      in.ignore();
      kv_.emplace_back(key, std::move(val));
    }
    size_t narr = 0;
    expect(in, "arrays") >> narr;
    in.ignore();
    for (size_t i = 0; i < narr; ++i) {
      Entry e;
      size_t rank = 0;
      in >> e.name >> rank;
      e.shape.resize(rank);
      for (auto& d : e.shape) in >> d;
      in >> e.offset;
      in.ignore();
      index_[e.name] = entries_.size();
      entries_.push_back(std::move(e));
    }
    size_t nbytes = 0;
    expect(in, "payload_bytes") >> nbytes;
    in.ignore();
    if (nbytes % 4) throw std::runtime_error("checkpoint: payload not float-aligned");
    std::vector<unsigned char> bytes(nbytes);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(nbytes));
    if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
    payload_.resize(nbytes / 4);
    for (size_t i = 0; i < payload_.size(); ++i) {
      const uint32_t bits = static_cast<uint32_t>(bytes[4 * i]) |
                            (static_cast<uint32_t>(bytes[4 * i + 1]) << 8) |
                            (static_cast<uint32_t>(bytes[4 * i + 2]) << 16) |
                            (static_cast<uint32_t>(bytes[4 * i + 3]) << 24);
      std::memcpy(&payload_[i], &bits, 4);
    }
  }

  int64_t steps() const { return steps_; }
  uint64_t config_hash() const { return config_hash_; }
  const std::string& config_text() const { return config_; }

  bool has_kv(const std::string& key) const {
    for (const auto& [k, v] : kv_)
      if (k == key) return true;
    return false;
  }
  const std::string& kv(const std::string& key) const {
    for (const auto& [k, v] : kv_)
      if (k == key) return v;
    throw std::runtime_error("checkpoint: missing kv " + key);
  }

  bool has_array(const std::string& name) const { return index_.count(name) > 0; }

  Tensor array(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("checkpoint: missing array " + name);
    const Entry& e = entries_[it->second];
    Tensor t(e.shape);
    std::copy_n(payload_.data() + e.offset, t.size(), t.ptr());
    return t;
  }

  std::vector<std::string> array_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

  const std::vector<int64_t>& array_shape(const std::string& name) const {
    return entries_[index_.at(name)].shape;
  }

 private:
  struct Entry {
    std::string name;
    std::vector<int64_t> shape;
    int64_t offset = 0;
  };

  static std::istream& expect(std::istream& in, const std::string& key) {
    std::string k;
    in >> k;
    if (k != key) throw std::runtime_error("checkpoint: expected field " + key + ", got " + k);
    return in;
  }

  int64_t steps_ = 0;
  uint64_t config_hash_ = 0;
  std::string config_;
  std::vector<std::pair<std::string, std::string>> kv_;
  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
  std::vector<float> payload_;
};

}  // namespace aap::io
