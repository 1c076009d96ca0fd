#pragma once

#include <cstdint>

#include "bloomlab/dyadic.hpp"
#include "bloomlab/rng.hpp"
#include "bloomlab/weights.hpp"

namespace testsupport {

inline bloomlab::GridFunction random_function(int depth, std::uint64_t seed, double scale = 1.0) {
  bloomlab::Rng rng(seed);
  bloomlab::GridFunction f(depth);
  for (double& v : f.values()) v = scale * rng.uniform(-1.0, 1.0);
  return f;
}

inline bloomlab::Weight random_weight(int depth, std::uint64_t seed, double spread = 1.0) {
  bloomlab::Rng rng(seed);
  bloomlab::GridFunction w(depth);
  for (double& v : w.values()) v = std::exp(spread * rng.uniform(-1.0, 1.0));
  return bloomlab::Weight(std::move(w));
}

inline bloomlab::GridFunction haar2(const bloomlab::DyadicInterval& I,
                                    const bloomlab::DyadicInterval& J, int depth) {
  using bloomlab::HaarKind;
  return bloomlab::GridFunction::tensor(bloomlab::haar(I, HaarKind::cancellative, depth),
                                        bloomlab::haar(J, HaarKind::cancellative, depth));
}

}  // namespace testsupport
