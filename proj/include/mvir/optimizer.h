#pragma once

#include <vector>

#include "mvir/param_store.h"

namespace mvir {

// AdamW with decoupled weight decay and per-group learning rates (taken from
// the store's group table). A group whose gradient slice contains a
// non-finite value is skipped for that step with a warning.
class AdamW {
public:
    explicit AdamW(ParamStore& store, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8)
        : store_(&store), beta1_(beta1), beta2_(beta2), eps_(eps),
          m_(store.size(), 0.0), v_(store.size(), 0.0) {}

    // Consumes store.grads; does not zero them.
    void step();

    int steps_taken() const { return t_; }

private:
    ParamStore* store_;
    double beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    int t_ = 0;
};

} // namespace mvir
