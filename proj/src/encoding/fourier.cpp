#include "lfr/encoding/fourier.hpp"

#include <cmath>

namespace lfr {

Eigen::VectorXd fourier_encode(const Eigen::VectorXd& values,
                               const FourierConfig& config) {
  const int l = config.num_frequencies;
  const int per_scalar = 2 * l + (config.include_input ? 1 : 0);
  Eigen::VectorXd out(values.size() * per_scalar);
  for (int d = 0; d < values.size(); ++d) {
    double w = values[d];
    double freq = 1.0;
    for (int k = 0; k < l; ++k) {
      out[d * per_scalar + k] = std::sin(freq * w);
      out[d * per_scalar + l + k] = std::cos(freq * w);
      freq *= 2.0;
    }
    if (config.include_input) out[d * per_scalar + 2 * l] = w;
  }
  return out;
}

}  // namespace lfr
