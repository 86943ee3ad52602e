#include "boxseg/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace boxseg {

void configure_threads_from_env() {
    const char* env = std::getenv("BOXSEG_THREADS");
    if (env == nullptr) return;
    try {
        int n = std::stoi(env);
        if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
    }
}

int max_threads() { return omp_get_max_threads(); }

void set_max_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

}  // namespace boxseg
