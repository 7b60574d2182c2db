#pragma once

#include <cstddef>
#include <vector>

namespace swift {

// Dense row-major f32 array.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<float> data;

  size_t numel() const {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }
};

}  // namespace swift
