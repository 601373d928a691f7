#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tfb {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Rejected argument values (bad shapes, nonpositive scales, out-of-range ranks).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Request exceeds a hard size cutoff (e.g. exact enumeration past n = 20).
class SizeLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged; message carries diagnostics.
class OptimizerFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tfb
