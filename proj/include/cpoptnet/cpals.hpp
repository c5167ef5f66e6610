#pragma once

#include <cstdint>
#include <utility>

#include "cpoptnet/cpopt.hpp"
#include "cpoptnet/tensor.hpp"

namespace cpoptnet {

struct AlsConfig {
  Index rank = 1;
  Index max_iters = 200;  // full A,B,C sweeps
  double fit_tol = 1e-8;  // change in relative fit between sweeps
  std::uint64_t seed = 0;
  double ridge = 1e-12;   // added to the Gram diagonal
  double init_scale = 0.1;

  void validate() const;
};

// Classical CP-ALS: cyclic exact least-squares updates per factor, with
// column renormalization after each update (norms absorbed into the next
// factor in the cycle). The trace records the same W objective as the
// NCG solver so the two are directly comparable.
std::pair<KruskalTensor, SolveTrace> als_solve(const SparseTensor3& t,
                                               const AlsConfig& cfg);

}  // namespace cpoptnet
