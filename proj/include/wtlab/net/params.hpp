#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wtlab/common.hpp"
#include "wtlab/rng.hpp"
#include "wtlab/signal/wav.hpp"
#include "wtlab/tensor.hpp"

namespace wtlab {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

enum class Init { zeros, ones, uniform, constant };

// Named tensors in insertion order. Parameters are counted; buffers (batch
// norm running statistics) are stored and checkpointed but not counted.
template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    bool buffer = false;
  };

  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Registers a tensor; uniform init draws U(-bound, bound) from a stream
  // keyed by (seed, name), so values do not depend on registration order.
  Tensor<T>& add(const std::string& name, Shape shape, Init init, double bound = 0.0,
                 bool buffer = false) {
    require(!index_.count(name), "parameter '", name, "' registered twice");
    Tensor<T> t(std::move(shape));
    switch (init) {
      case Init::zeros:
        break;
      case Init::ones:
        t.fill(T(1));
        break;
      case Init::constant:
        t.fill(static_cast<T>(bound));
        break;
      case Init::uniform: {
        Rng rng(mix_seed(seed_, fnv1a(name)));
        for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
        break;
      }
    }
    index_[name] = entries_.size();
    entries_.push_back({name, std::move(t), buffer});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Tensor<T>& get(const std::string& name) {
    const auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '", name, "'");
    return entries_[it->second].value;
  }
  const Tensor<T>& get(const std::string& name) const {
    const auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '", name, "'");
    return entries_[it->second].value;
  }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
      if (!e.buffer) n += e.value.size();
    }
    return n;
  }

  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out(seed_);
    for (const auto& e : entries_) {
      auto& t = out.add(e.name, e.value.shape(), Init::zeros, 0.0, e.buffer);
      t = e.value.template cast<U>();
    }
    return out;
  }

 private:
  std::uint64_t seed_;
  std::deque<Entry> entries_;  // stable references across add()
  std::map<std::string, std::size_t> index_;
};

inline std::string module_of(const std::string& name) { return name.substr(0, name.find('.')); }

// Per-module parameter counts in first-appearance order; sums to count().
template <typename T>
std::vector<std::pair<std::string, std::size_t>> param_breakdown(const ParameterStore<T>& store) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& e : store.entries()) {
    if (e.buffer) continue;
    const auto mod = module_of(e.name);
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == mod; });
    if (it == out.end()) it = out.insert(out.end(), {mod, 0});
    it->second += e.value.size();
  }
  return out;
}

template <typename T>
std::size_t param_count(const ParameterStore<T>& store) {
  return store.count();
}

// Checkpoint: <stem>.bin holds little-endian f32 values back to back;
// <stem>.json lists {name, shape, offset, count, buffer} with offsets in values.
namespace checkpoint {

template <typename T>
void save(const std::filesystem::path& stem, const ParameterStore<T>& store) {
  std::string bin;
  nlohmann::json index = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : store.entries()) {
    index.push_back({{"name", e.name},
                     {"shape", e.value.shape()},
                     {"offset", offset},
                     {"count", e.value.size()},
                     {"buffer", e.buffer}});
    for (T v : e.value.vec()) {
      const float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      wav::detail::put_u32(bin, u);
    }
    offset += e.value.size();
  }
  nlohmann::json doc{{"format", "wtlab-params"}, {"version", 1}, {"seed", store.seed()},
                     {"tensors", index}};
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";
  wav::write_atomic(bin_path, bin);
  const auto text = doc.dump(2) + "\n";
  wav::write_atomic(json_path, text);
}

// Loads values into an existing store; names and shapes must match.
template <typename T>
void load(const std::filesystem::path& stem, ParameterStore<T>& store) {
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";
  const auto bin = wav::read_file(bin_path);
  const auto text = wav::read_file(json_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail("checkpoint ", json_path.string(), ": ", e.what());
  }
  require(doc.value("format", "") == "wtlab-params", "checkpoint ", json_path.string(),
          ": not a parameter index");
  std::size_t seen = 0;
  for (const auto& item : doc.at("tensors")) {
    const auto name = item.at("name").get<std::string>();
    require(store.contains(name), "checkpoint has unknown tensor '", name, "'");
    auto& t = store.get(name);
    const auto shape = item.at("shape").get<Shape>();
    require(shape == t.shape(), "checkpoint tensor '", name, "' has shape ", shape_str(shape),
            ", model expects ", shape_str(t.shape()));
    const auto offset = item.at("offset").get<std::size_t>();
    require((offset + t.size()) * 4 <= bin.size(), "checkpoint data too short for '", name, "'");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint32_t u = wav::detail::u32le(
          reinterpret_cast<const unsigned char*>(bin.data()) + (offset + i) * 4);
      float f;
      std::memcpy(&f, &u, 4);
      t[i] = static_cast<T>(f);
    }
    ++seen;
  }
  require(seen == store.entries().size(), "checkpoint has ", seen, " tensors, model has ",
          store.entries().size());
}

}  // namespace checkpoint

}  // namespace wtlab
