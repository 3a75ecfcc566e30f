#pragma once

#include <Eigen/Dense>

namespace lfr {

struct FourierConfig {
  int num_frequencies = 5;   // frequencies 2^k, k in [0, L)
  bool include_input = false;

  int output_dim(int input_dim) const {
    return input_dim * (2 * num_frequencies + (include_input ? 1 : 0));
  }
};

/// Per input scalar w emits [sin(2^0 w) .. sin(2^{L-1} w),
/// cos(2^0 w) .. cos(2^{L-1} w)] (input value appended last when
/// configured), blocks concatenated in input order.
Eigen::VectorXd fourier_encode(const Eigen::VectorXd& values,
                               const FourierConfig& config);

}  // namespace lfr
