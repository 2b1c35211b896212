#include "mvir/optimizer.h"

#include <cmath>
#include <iostream>

namespace mvir {

void AdamW::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (const auto& g : store_->groups()) {
        const double* gr = store_->grads.data() + g.offset;
        bool finite = true;
        for (size_t i = 0; i < g.length; ++i)
            if (!std::isfinite(gr[i])) {
                finite = false;
                break;
            }
        if (!finite) {
            std::cerr << "warning: non-finite gradient in group '" << g.name
                      << "', skipping its update this step\n";
            continue;
        }
        double* p = store_->values.data() + g.offset;
        double* m = m_.data() + g.offset;
        double* v = v_.data() + g.offset;
        for (size_t i = 0; i < g.length; ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * gr[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * gr[i] * gr[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= g.lr * (mhat / (std::sqrt(vhat) + eps_) + g.weight_decay * p[i]);
        }
    }
}

} // namespace mvir
