#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "sparta/tensor.hpp"

namespace sparta {

/// Stable handle into a ParameterStore.
struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const { return index != static_cast<std::size_t>(-1); }
  bool operator==(const ParamId&) const = default;
};

struct Parameter {
  std::string name;  // dotted path, e.g. "si.taa.w_query"
  Tensor tensor;
  bool trainable = true;

  bool operator==(const Parameter&) const = default;
};

/// Ordered collection of named parameters. Ids are insertion indices.
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor tensor, bool trainable = true);

  std::size_t size() const { return params_.size(); }
  const Parameter& operator[](ParamId id) const { return params_.at(id.index); }
  Parameter& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter& at(std::size_t i) const { return params_.at(i); }
  Parameter& at(std::size_t i) { return params_.at(i); }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  ParamId find(const std::string& name) const;

  /// Total number of scalar values; `trainable_only` skips frozen ones.
  std::size_t scalar_count(bool trainable_only = false) const;
  void set_trainable_prefix(const std::string& prefix, bool trainable);

  const std::vector<Parameter>& parameters() const { return params_; }
  bool operator==(const ParameterStore& other) const { return params_ == other.params_; }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-parameter gradient accumulators aligned with a ParameterStore.
class GradientStore {
 public:
  GradientStore() = default;
  explicit GradientStore(const ParameterStore& params);

  std::size_t size() const { return grads_.size(); }
  Tensor& operator[](std::size_t i) { return grads_.at(i); }
  const Tensor& operator[](std::size_t i) const { return grads_.at(i); }
  Tensor& operator[](ParamId id) { return grads_.at(id.index); }
  const Tensor& operator[](ParamId id) const { return grads_.at(id.index); }

  void zero();
  GradientStore& operator+=(const GradientStore& other);

 private:
  std::vector<Tensor> grads_;
};

// Text layout, one record per line:
//   <name> <trainable 0|1> <rank> <dim>... <value>...
// Values use the shortest round-trip decimal form, so write/read is exact.
void write_parameters(std::ostream& out, const ParameterStore& params);
ParameterStore read_parameters(std::istream& in);
void save_parameters(const std::filesystem::path& path, const ParameterStore& params);
ParameterStore load_parameters(const std::filesystem::path& path);

}  // namespace sparta
