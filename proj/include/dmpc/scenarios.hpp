#pragma once

/**
 * @file
 * @brief Built-in benchmark systems used by the tests and the CLI.
 */

#include "system_model.hpp"

namespace dmpc::scenarios {

/**
 * Two scalar subsystems with mutual coupling:
 * x_i+ = 2 x_i + 0.5 x_j + u_i, |x_i| <= 5, -0.25 <= u_i <= 1,
 * stage weights Q_{N_i} = 0.5 I, R_i = 0.1.
 */
inline DistributedSystem coupled_pair()
{
  std::vector<SubsystemModel> subs;
  for (Index i = 0; i < 2; ++i) {
    SubsystemModel s;
    s.A.resize(1, 2);
    s.A << (i == 0 ? 2.0 : 0.5), (i == 0 ? 0.5 : 2.0);
    s.B = Matrix::Ones(1, 1);
    s.G = Matrix::Zero(2, 2);
    s.G(0, i) = 1.0;
    s.G(1, i) = -1.0;
    s.g       = Vector::Constant(2, 5.0);
    s.H.resize(2, 1);
    s.H << 1.0, -1.0;
    s.h.resize(2);
    s.h << 1.0, 0.25;
    s.Q = 0.5 * Matrix::Identity(2, 2);
    s.R = 0.1 * Matrix::Identity(1, 1);
    subs.push_back(s);
  }
  return make_system(std::move(subs), Topology{{{0, 1}, {0, 1}}});
}

}  // namespace dmpc::scenarios
