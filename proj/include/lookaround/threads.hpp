#pragma once

namespace lookaround::threads {

/// Number of workers parallel kernels may use.
/// Resolution order: programmatic cap (set_worker_cap), then the
/// LOOKAROUND_THREADS environment variable, then all hardware threads.
/// A value of 0 at any level means "auto".
int worker_count();

/// Override the worker count for this process (0 restores auto).
void set_worker_cap(int n);

}  // namespace lookaround::threads
