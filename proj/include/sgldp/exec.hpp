#pragma once

namespace sgldp::exec {

// Parallel kernels take a policy so the serial path stays available as a
// reference for tests and benchmarks. Both paths reduce partial results in a
// fixed chunk order, so they produce bit-identical output.
enum class Policy { serial, parallel };

// Worker count used by Policy::parallel. Defaults to SGLDP_WORKERS from the
// environment, else the OpenMP default.
int worker_count();
void set_worker_count(int n);

}  // namespace sgldp::exec
