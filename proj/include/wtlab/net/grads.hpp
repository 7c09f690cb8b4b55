#pragma once

#include <map>
#include <string>

#include "wtlab/net/params.hpp"
#include "wtlab/tensor.hpp"

namespace wtlab::nn {

// Parameter gradients keyed by parameter name.
template <typename T>
class Grads {
 public:
  Tensor<T>& operator()(const std::string& name, const Shape& shape) {
    auto it = map_.find(name);
    if (it == map_.end()) it = map_.emplace(name, Tensor<T>(shape)).first;
    return it->second;
  }
  bool contains(const std::string& name) const { return map_.count(name) > 0; }
  const Tensor<T>& at(const std::string& name) const {
    const auto it = map_.find(name);
    require(it != map_.end(), "no gradient for '", name, "'");
    return it->second;
  }
  const std::map<std::string, Tensor<T>>& all() const { return map_; }

 private:
  std::map<std::string, Tensor<T>> map_;
};

inline double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace wtlab::nn
