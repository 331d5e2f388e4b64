#include "sparta/params.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sparta/error.hpp"

namespace sparta {

ParamId ParameterStore::add(std::string name, Tensor tensor, bool trainable) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
    throw Error("invalid parameter name '" + name + "'");
  if (index_.count(name)) throw Error("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(tensor), trainable});
  return ParamId{params_.size() - 1};
}

ParamId ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("no parameter named '" + name + "'");
  return ParamId{it->second};
}

std::size_t ParameterStore::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (!trainable_only || p.trainable) n += p.tensor.size();
  return n;
}

void ParameterStore::set_trainable_prefix(const std::string& prefix, bool trainable) {
  for (auto& p : params_)
    if (p.name.compare(0, prefix.size(), prefix) == 0) p.trainable = trainable;
}

GradientStore::GradientStore(const ParameterStore& params) {
  grads_.reserve(params.size());
  for (const auto& p : params.parameters()) grads_.push_back(Tensor::zeros_like(p.tensor));
}

void GradientStore::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

GradientStore& GradientStore::operator+=(const GradientStore& other) {
  if (other.grads_.size() != grads_.size()) throw ShapeError("gradient stores differ in size");
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
  return *this;
}

void write_parameters(std::ostream& out, const ParameterStore& params) {
  char buf[64];
  for (const auto& p : params.parameters()) {
    out << p.name << ' ' << (p.trainable ? 1 : 0) << ' ' << p.tensor.rank();
    for (std::size_t d : p.tensor.shape()) out << ' ' << d;
    for (double v : p.tensor.values()) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

ParameterStore read_parameters(std::istream& in) {
  ParameterStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name;
    int trainable = 0;
    std::size_t rank = 0;
    if (!(ss >> name >> trainable >> rank) || rank < 1 || rank > 2)
      throw ParseError(lineno, "bad parameter record header");
    Shape shape(rank);
    for (auto& d : shape)
      if (!(ss >> d) || d == 0) throw ParseError(lineno, "bad parameter shape");
    std::vector<double> values;
    values.reserve(shape_size(shape));
    std::string tok;
    while (ss >> tok) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(lineno, "bad parameter value '" + tok + "'");
      values.push_back(v);
    }
    if (values.size() != shape_size(shape))
      throw ParseError(lineno, "parameter '" + name + "' has " + std::to_string(values.size()) +
                                   " values, shape " + shape_string(shape) + " needs " +
                                   std::to_string(shape_size(shape)));
    try {
      store.add(name, Tensor(shape, std::move(values)), trainable != 0);
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return store;
}

void save_parameters(const std::filesystem::path& path, const ParameterStore& params) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_parameters(out, params);
}

ParameterStore load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_parameters(in);
}

}  // namespace sparta
