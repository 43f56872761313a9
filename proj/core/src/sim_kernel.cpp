#include "cbtsim/sim_kernel.hpp"

#include <algorithm>

namespace cbtsim {

Time sample_latency(Rng& rng, Time tau, double jitter) {
  if (jitter <= 0.0) return std::max<Time>(tau, 1);
  Time spread = static_cast<Time>(static_cast<double>(tau) * jitter);
  Time lo = tau - spread;
  Time hi = tau + spread;
  if (lo < 1) lo = 1;
  return rng.range(lo, hi);
}

}  // namespace cbtsim
