#pragma once

#include <cstdint>
#include <vector>

#include "avec/random.hpp"
#include "avec/tensor.hpp"

namespace testutil {

inline avec::Tensor random_tensor(avec::Shape shape, avec::Rng& rng, double scale = 1.0) {
  avec::Tensor t(std::move(shape));
  for (double& v : t.values_mut()) v = rng.normal() * scale;
  return t;
}

inline std::vector<std::vector<double>> to_rows(const avec::Tensor& t) {
  const std::size_t n = t.dim(0), d = t.dim(1);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) rows[i][j] = t.at(i, j);
  return rows;
}

}  // namespace testutil
