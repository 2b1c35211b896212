#include "mvir/grad_check.h"

namespace mvir {

GradCheckReport grad_check(const std::function<V(Tape&)>& build, ParamStore& store, double h,
                           const std::vector<size_t>& indices) {
    std::vector<double> ad(store.size(), 0.0);
    {
        Tape t(&store, ad.data());
        V root = build(t);
        check(root.rows() == 1 && root.cols() == 1, "grad_check: graph must be scalar-valued");
        t.backward_scalar(root);
    }

    auto eval = [&]() {
        Tape t(&store);
        return build(t).scalar();
    };

    GradCheckReport rep;
    auto probe = [&](size_t i) {
        double saved = store.values[i];
        store.values[i] = saved + h;
        double fp = eval();
        store.values[i] = saved - h;
        double fm = eval();
        store.values[i] = saved;
        double fd = (fp - fm) / (2.0 * h);
        double e = rel_err(ad[i], fd);
        if (e > rep.max_rel_err) {
            rep.max_rel_err = e;
            rep.worst_param = i;
            rep.worst_ad = ad[i];
            rep.worst_fd = fd;
        }
        ++rep.checked;
    };

    if (indices.empty()) {
        for (size_t i = 0; i < store.size(); ++i)
            probe(i);
    } else {
        for (size_t i : indices)
            probe(i);
    }
    return rep;
}

} // namespace mvir
