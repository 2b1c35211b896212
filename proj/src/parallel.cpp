#include "mvir/parallel.h"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mvir {

void for_each_shard(int n_shards, Exec mode, const std::function<void(int)>& fn) {
#ifdef _OPENMP
    if (mode == Exec::openmp) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int s = 0; s < n_shards; ++s)
            fn(s);
        return;
    }
#else
    (void)mode;
#endif
    for (int s = 0; s < n_shards; ++s)
        fn(s);
}

void parallel_for(int n, Exec mode, const std::function<void(int)>& fn) {
#ifdef _OPENMP
    if (mode == Exec::openmp) {
#pragma omp parallel for schedule(dynamic, 64)
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
#else
    (void)mode;
#endif
    for (int i = 0; i < n; ++i)
        fn(i);
}

} // namespace mvir
