#ifndef BOXSEG_PARALLEL_HPP
#define BOXSEG_PARALLEL_HPP

namespace boxseg {

// Reads BOXSEG_THREADS and caps the OpenMP team size. Unset or invalid
// values leave the OpenMP default in place.
void configure_threads_from_env();

int max_threads();
void set_max_threads(int n);

}  // namespace boxseg

#endif
