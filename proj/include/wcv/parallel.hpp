#pragma once

#include <cstddef>
#include <functional>

namespace wcv {

/// Worker count used by parallel_for. Defaults to the WCV_THREADS environment
/// variable when set, otherwise std::thread::hardware_concurrency().
std::size_t thread_count();
void set_thread_count(std::size_t n);  // 0 restores the default

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs; the
/// result is independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wcv
