#include "sparta/pca.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "sparta/error.hpp"
#include "sparta/rng.hpp"

namespace sparta {
namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<double> multiply(const Matrix& m, const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Removes the components of v along the (unit) vectors in `basis`.
void orthogonalize(std::vector<double>& v, std::span<const std::vector<double>> basis) {
  for (const auto& b : basis) {
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * b[i];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * b[i];
  }
}

// Leading eigenpair of a symmetric PSD matrix restricted to the complement
// of `basis`. Once the matrix is negligible against `scale` the eigenvalue is
// 0 and the vector is any unit vector orthogonal to `basis`.
std::pair<double, std::vector<double>> power_iteration(const Matrix& m, double tol, double scale,
                                                       Rng& rng,
                                                       std::span<const std::vector<double>> basis) {
  const std::size_t d = m.size();
  std::vector<double> v(d);
  for (double& x : v) x = uniform(rng, -1.0, 1.0);
  // Two passes keep the result orthogonal to working precision.
  orthogonalize(v, basis);
  orthogonalize(v, basis);
  const double n = norm(v);
  if (n < 1e-300) return {0.0, std::vector<double>(d, 0.0)};
  for (double& x : v) x /= n;
  const double negligible = 1e-12 * scale;
  double lambda = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    std::vector<double> w = multiply(m, v);
    if (norm(w) <= negligible) return {0.0, v};
    orthogonalize(w, basis);
    orthogonalize(w, basis);
    const double wn = norm(w);
    if (wn <= negligible) return {0.0, v};
    for (double& x : w) x /= wn;
    // Sign-align before measuring the change.
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += w[i] * v[i];
    if (dot < 0) for (double& x : w) x = -x;
    double delta = 0.0;
    for (std::size_t i = 0; i < d; ++i) delta = std::max(delta, std::abs(w[i] - v[i]));
    v = std::move(w);
    lambda = wn;
    if (delta < tol) break;
  }
  // Rayleigh quotient is more accurate than the last norm.
  std::vector<double> mv = multiply(m, v);
  lambda = 0.0;
  for (std::size_t i = 0; i < d; ++i) lambda += v[i] * mv[i];
  return {lambda, v};
}

}  // namespace

PcaResult pca_project(std::span<const std::vector<double>> vectors, double tolerance) {
  if (vectors.size() < 2)
    throw Error("PCA needs at least 2 vectors, got " + std::to_string(vectors.size()));
  const std::size_t d = vectors[0].size();
  if (d == 0) throw ShapeError("PCA over zero-length vectors");
  for (const auto& v : vectors)
    if (v.size() != d) throw ShapeError("PCA: vectors differ in length");
  const double n = static_cast<double>(vectors.size());

  PcaResult r;
  r.mean.assign(d, 0.0);
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < d; ++i) r.mean[i] += v[i] / n;

  Matrix cov(d, std::vector<double>(d, 0.0));
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = v[i] - r.mean[i];
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += ci * (v[j] - r.mean[j]) / n;
    }

  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i][i];
  Rng rng(0x5eed);
  std::vector<std::vector<double>> found;
  for (std::size_t k = 0; k < 2 && k < d; ++k) {
    auto [lambda, vec] = power_iteration(cov, tolerance, trace, rng, found);
    if (norm(vec) > 0.0) found.push_back(vec);
    if (lambda < 0.0) lambda = 0.0;
    r.eigenvalues[k] = lambda;
    r.components[k] = vec;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i][j] -= lambda * vec[i] * vec[j];
  }
  if (d < 2) r.components[1].assign(d, 0.0);

  r.coordinates.reserve(vectors.size());
  for (const auto& v : vectors) {
    std::array<double, 2> xy{0.0, 0.0};
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < d; ++i) xy[k] += (v[i] - r.mean[i]) * r.components[k][i];
    r.coordinates.push_back(xy);
  }
  return r;
}

void write_pca_csv(std::ostream& out, const PcaResult& result, std::span<const SpeakerRole> tags) {
  if (tags.size() != result.coordinates.size())
    throw Error("PCA: tag count does not match coordinate count");
  out << "x,y,speaker\n";
  for (std::size_t i = 0; i < tags.size(); ++i)
    out << result.coordinates[i][0] << ',' << result.coordinates[i][1] << ','
        << speaker_code(tags[i]) << '\n';
}

}  // namespace sparta
