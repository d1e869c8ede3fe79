#pragma once

#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fmanet {

// Thrown on malformed configs / unknown config keys. CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on missing/incompatible checkpoints. CLI maps this to exit 3.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on missing/corrupt data files or unknown sample ids. CLI maps this to exit 4.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class... Parts>
[[noreturn]] void fail(const Parts&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    throw std::invalid_argument(os.str());
}

}  // namespace detail

template <class... Parts>
inline void fm_check(bool cond, const Parts&... parts) {
    if (!cond) detail::fail(parts...);
}

// Worker count for operator-internal parallelism, capped by FGDF_THREADS.
inline int worker_count() {
    static const int n = [] {
        int hw = 1;
#ifdef _OPENMP
        hw = omp_get_max_threads();
#endif
        if (const char* env = std::getenv("FGDF_THREADS")) {
            int cap = std::atoi(env);
            if (cap > 0 && cap < hw) hw = cap;
        }
        return hw < 1 ? 1 : hw;
    }();
    return n;
}

// Static schedule over disjoint output slices; results do not depend on the
// number of workers.
template <class F>
inline void parallel_for(int n, F&& f) {
#ifdef _OPENMP
#pragma omp parallel for num_threads(fmanet::worker_count()) schedule(static)
#endif
    for (int i = 0; i < n; ++i) f(i);
}

}  // namespace fmanet
