#pragma once

#include <algorithm>
#include <exception>
#include <limits>
#include <vector>

#include <omp.h>

namespace curvcone {

// Worker count for OpenMP kernels; 0 keeps the runtime default.
void set_threads(int threads);
int max_threads();

enum class Exec { Serial, Parallel };

// Runs f(i) for i in [0, count). Results are written per index, so every
// reduction done afterwards is independent of the thread count.
template <class F>
void for_each_index(int count, F&& f, Exec exec = Exec::Parallel) {
    if (exec == Exec::Serial) {
        for (int i = 0; i < count; ++i) f(i);
        return;
    }
    // Exceptions cannot leave an OpenMP region; the lowest failing index is rethrown.
    std::exception_ptr err;
    int err_index = count;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) {
        try {
            f(i);
        } catch (...) {
#pragma omp critical(curvcone_for_each_error)
            if (i < err_index) {
                err_index = i;
                err = std::current_exception();
            }
        }
    }
    if (err) std::rethrow_exception(err);
}

template <class T, class F>
std::vector<T> map_index(int count, F&& f, Exec exec = Exec::Parallel) {
    std::vector<T> out(static_cast<size_t>(count));
    for_each_index(count, [&](int i) { out[i] = f(i); }, exec);
    return out;
}

template <class F>
double min_index(int count, F&& f, Exec exec = Exec::Parallel) {
    auto v = map_index<double>(count, f, exec);
    double m = std::numeric_limits<double>::infinity();
    for (double x : v) m = std::min(m, x);
    return m;
}

}  // namespace curvcone
