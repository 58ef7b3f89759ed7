#pragma once

#include <functional>

namespace gaitlab {

/// Worker count from GAITLAB_WORKERS, else the hardware concurrency (>= 1).
int default_workers();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once; results must be written to per-index slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace gaitlab
