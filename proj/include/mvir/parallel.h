#pragma once

#include <functional>

namespace mvir {

// Execution policy for the sharded kernels. Serial runs every shard on the
// calling thread in shard order and is the reference the OpenMP path is
// tested against; both must produce bit-identical results because per-shard
// work and the merge order are fixed regardless of thread count.
enum class Exec { serial, openmp };

// Runs fn(shard) for shard = 0..n_shards-1.
void for_each_shard(int n_shards, Exec mode, const std::function<void(int)>& fn);

// Runs fn(i) for i = 0..n-1 in chunks; used for embarrassingly parallel
// per-pixel / per-cell loops whose outputs go to disjoint slots.
void parallel_for(int n, Exec mode, const std::function<void(int)>& fn);

} // namespace mvir
