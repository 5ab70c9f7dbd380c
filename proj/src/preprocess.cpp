#include "sinkcpd/preprocess.hpp"

#include "sinkcpd/error.hpp"

#include <cmath>
#include <string>

namespace sinkcpd {

Standardizer Standardizer::identity(Index d) {
  return Standardizer{Vector::Zero(d), Vector::Ones(d)};
}

Standardizer Standardizer::fit(const Matrix& data) {
  if (data.rows() < 1) throw InputError("Standardizer::fit: no rows");
  const Index d = data.cols();
  Standardizer s;
  s.mean = data.colwise().mean().transpose();
  s.scale.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double var = (data.col(j).array() - s.mean(j)).square().mean();
    const double sd = std::sqrt(var);
    s.scale(j) = (sd > 1e-12 && std::isfinite(sd)) ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& data) const {
  if (data.cols() != dim())
    throw InputError("Standardizer: data has " + std::to_string(data.cols()) +
                     " columns, expected " + std::to_string(dim()));
  Matrix out(data.rows(), data.cols());
  for (Index j = 0; j < data.cols(); ++j)
    out.col(j) = (data.col(j).array() - mean(j)) / scale(j);
  return out;
}

}  // namespace sinkcpd
