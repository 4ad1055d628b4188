#pragma once

namespace bemdc {

/// Applies the BEMDC_THREADS environment variable (if set) to the OpenMP
/// runtime. Returns the thread count in effect.
int configure_threads_from_env();

int thread_count();

}  // namespace bemdc
