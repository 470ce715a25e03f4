#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace semshift {

// Embedding and design matrices are row-major: one row per word / document.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Thrown for unusable inputs and fatal configuration problems. The CLI turns
// these into an error line on stderr and a nonzero exit.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace semshift
