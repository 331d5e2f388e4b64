#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "sparta/labels.hpp"

namespace sparta {

struct PcaResult {
  std::vector<double> mean;
  std::array<std::vector<double>, 2> components;  // unit vectors
  std::array<double, 2> eigenvalues{};            // of the covariance, divisor n
  std::vector<std::array<double, 2>> coordinates;
};

/// Projects mean-centred vectors onto the two leading covariance
/// eigenvectors, found by power iteration with deflation.
PcaResult pca_project(std::span<const std::vector<double>> vectors, double tolerance = 1e-10);

/// "x,y,speaker" rows; speaker written as T / P.
void write_pca_csv(std::ostream& out, const PcaResult& result, std::span<const SpeakerRole> tags);

}  // namespace sparta
