#pragma once

#include "sinkcpd/ot.hpp"

namespace sinkcpd {

/// Per-dimension affine map x -> (x - mean) / scale.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer identity(Index d);
  /// z-scoring statistics of the rows of `data`. Constant columns get scale 1.
  static Standardizer fit(const Matrix& data);

  Index dim() const { return mean.size(); }
  Matrix apply(const Matrix& data) const;
};

}  // namespace sinkcpd
