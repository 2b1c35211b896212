#include "mvir/tape.h"

#include <cmath>
#include <cstring>

#include "mvir/encodings.h"
#include "mvir/kernels.h"

namespace mvir {

const char* op_name(Op op) {
    switch (op) {
    case Op::kConst: return "const";
    case Op::kParam: return "param";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add-scalar";
    case Op::kMatmulNT: return "matmul-nt";
    case Op::kMatmulNN: return "matmul-nn";
    case Op::kSoftplus: return "softplus";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kAbs: return "abs";
    case Op::kPowInt: return "pow-int";
    case Op::kSum: return "sum";
    case Op::kDot: return "dot";
    case Op::kRowDot: return "row-dot";
    case Op::kRowNorm: return "row-norm";
    case Op::kNormalizeRows: return "normalize";
    case Op::kSelect: return "select";
    case Op::kStopGrad: return "stop-gradient";
    case Op::kConcatCols: return "concat-cols";
    case Op::kSliceCols: return "slice-cols";
    case Op::kSliceRows: return "slice-rows";
    case Op::kRepeatRows: return "repeat-rows";
    case Op::kReshape: return "reshape";
    case Op::kHashEnc: return "hash-encode";
    case Op::kHashJacVec: return "hash-jacvec";
    case Op::kTransmitWeights: return "transmit-weights";
    }
    return "?";
}

int V::rows() const { return tape->rows(id); }
int V::cols() const { return tape->cols(id); }
std::span<const double> V::value() const { return tape->value(id); }
double V::scalar() const {
    auto v = value();
    check(v.size() == 1, "scalar() on non-scalar node");
    return v[0];
}

V operator+(V a, V b) { return a.tape->add(a, b); }
V operator-(V a, V b) { return a.tape->sub(a, b); }
V operator*(V a, V b) { return a.tape->mul(a, b); }
V operator/(V a, V b) { return a.tape->div(a, b); }

void Tape::reset() {
    nodes_.clear();
    vals_.clear();
    adj_.clear();
    aux_masks_.clear();
    aux_lists_.clear();
}

std::span<const double> Tape::value(int id) const {
    return {val(id), elems(id)};
}

V Tape::push(Node n) {
    n.off = vals_.size();
    vals_.resize(vals_.size() + static_cast<size_t>(n.rows) * n.cols, 0.0);
    nodes_.push_back(n);
    return V{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_finite(int id) {
    if (!guard_nonfinite)
        return;
    const double* v = val(id);
    size_t n = elems(id);
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(v[i]))
            fail("non-finite value produced by op '", op_name(nodes_[id].op), "' (element ", i,
                 ")");
}

V Tape::constant(const Mat& m) { return constant(m.rows, m.cols, m.data()); }

V Tape::constant(int rows, int cols, const double* data) {
    Node n;
    n.op = Op::kConst;
    n.rows = rows;
    n.cols = cols;
    V v = push(n);
    std::memcpy(val(v.id), data, sizeof(double) * elems(v.id));
    check_finite(v.id);
    return v;
}

V Tape::param(size_t offset, int rows, int cols) {
    check(store_ != nullptr, "tape has no parameter store");
    size_t count = static_cast<size_t>(rows) * cols;
    check(offset + count <= store_->size(), "param slice out of range");
    Node n;
    n.op = Op::kParam;
    n.rows = rows;
    n.cols = cols;
    n.poff = offset;
    V v = push(n);
    std::memcpy(val(v.id), store_->values.data() + offset, sizeof(double) * count);
    check_finite(v.id);
    return v;
}

V Tape::param(const ParamStore::Group& g, size_t rel_offset, int rows, int cols) {
    size_t count = static_cast<size_t>(rows) * cols;
    check(rel_offset + count <= g.length, "param slice exceeds group '", g.name, "'");
    return param(g.offset + rel_offset, rows, cols);
}

namespace {
// Broadcast categories for the b operand of a binary elementwise op.
enum class Bc { same, scalar, row, col };

Bc classify(int ar, int ac, int br, int bc) {
    if (br == ar && bc == ac)
        return Bc::same;
    if (br == 1 && bc == 1)
        return Bc::scalar;
    if (br == 1 && bc == ac)
        return Bc::row;
    if (bc == 1 && br == ar)
        return Bc::col;
    fail("shape mismatch in elementwise op: ", ar, "x", ac, " vs ", br, "x", bc);
}

inline size_t bindex(Bc bc, int i, int j, int cols) {
    switch (bc) {
    case Bc::same: return static_cast<size_t>(i) * cols + j;
    case Bc::scalar: return 0;
    case Bc::row: return static_cast<size_t>(j);
    case Bc::col: return static_cast<size_t>(i);
    }
    return 0;
}
} // namespace

void Tape::accumulate_broadcast(int bid, int rows, int cols, const double* g) {
    Node& b = nodes_[bid];
    Bc bc = classify(rows, cols, b.rows, b.cols);
    double* ba = adj(bid);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            ba[bindex(bc, i, j, cols)] += g[static_cast<size_t>(i) * cols + j];
}

#define BINARY_ELEMENTWISE(NAME, OPK, EXPR)                                                        \
    V Tape::NAME(V a, V b) {                                                                       \
        const Node na = nodes_[a.id];                                                             \
        Bc bc = classify(na.rows, na.cols, nodes_[b.id].rows, nodes_[b.id].cols);                  \
        Node n;                                                                                    \
        n.op = OPK;                                                                                \
        n.a = a.id;                                                                                \
        n.b = b.id;                                                                                \
        n.rows = na.rows;                                                                          \
        n.cols = na.cols;                                                                          \
        V out = push(n);                                                                           \
        const double* av = val(a.id);                                                              \
        const double* bv = val(b.id);                                                              \
        double* ov = val(out.id);                                                                  \
        int R = na.rows, C = na.cols;                                                              \
        for (int i = 0; i < R; ++i)                                                                \
            for (int j = 0; j < C; ++j) {                                                          \
                size_t oi = static_cast<size_t>(i) * C + j;                                        \
                double x = av[oi];                                                                 \
                double y = bv[bindex(bc, i, j, C)];                                                \
                ov[oi] = (EXPR);                                                                   \
            }                                                                                      \
        check_finite(out.id);                                                                      \
        return out;                                                                                \
    }

BINARY_ELEMENTWISE(add, Op::kAdd, x + y)
BINARY_ELEMENTWISE(sub, Op::kSub, x - y)
BINARY_ELEMENTWISE(mul, Op::kMul, x* y)
BINARY_ELEMENTWISE(div, Op::kDiv, x / y)
#undef BINARY_ELEMENTWISE

#define UNARY_ELEMENTWISE(NAME, OPK, EXPR)                                                         \
    V Tape::NAME(V a) {                                                                            \
        const Node na = nodes_[a.id];                                                             \
        Node n;                                                                                    \
        n.op = OPK;                                                                                \
        n.a = a.id;                                                                                \
        n.rows = na.rows;                                                                          \
        n.cols = na.cols;                                                                          \
        V out = push(n);                                                                           \
        const double* av = val(a.id);                                                              \
        double* ov = val(out.id);                                                                  \
        size_t N = elems(out.id);                                                                  \
        for (size_t i = 0; i < N; ++i) {                                                           \
            double x = av[i];                                                                      \
            ov[i] = (EXPR);                                                                        \
        }                                                                                          \
        check_finite(out.id);                                                                      \
        return out;                                                                                \
    }

UNARY_ELEMENTWISE(relu, Op::kRelu, x > 0 ? x : 0.0)
UNARY_ELEMENTWISE(sigmoid, Op::kSigmoid, kernels::sigmoid(x))
UNARY_ELEMENTWISE(vexp, Op::kExp, std::exp(x))
UNARY_ELEMENTWISE(vlog, Op::kLog, std::log(x))
UNARY_ELEMENTWISE(vabs, Op::kAbs, std::abs(x))
#undef UNARY_ELEMENTWISE

V Tape::scale(V a, double c) {
    Node n;
    n.op = Op::kScale;
    n.a = a.id;
    n.rows = nodes_[a.id].rows;
    n.cols = nodes_[a.id].cols;
    n.c = c;
    V out = push(n);
    const double* av = val(a.id);
    double* ov = val(out.id);
    for (size_t i = 0, N = elems(out.id); i < N; ++i)
        ov[i] = c * av[i];
    check_finite(out.id);
    return out;
}

V Tape::add_scalar(V a, double c) {
    Node n;
    n.op = Op::kAddScalar;
    n.a = a.id;
    n.rows = nodes_[a.id].rows;
    n.cols = nodes_[a.id].cols;
    n.c = c;
    V out = push(n);
    const double* av = val(a.id);
    double* ov = val(out.id);
    for (size_t i = 0, N = elems(out.id); i < N; ++i)
        ov[i] = av[i] + c;
    check_finite(out.id);
    return out;
}

V Tape::softplus(V a, double beta) {
    check(beta > 0, "softplus beta must be positive");
    Node n;
    n.op = Op::kSoftplus;
    n.a = a.id;
    n.rows = nodes_[a.id].rows;
    n.cols = nodes_[a.id].cols;
    n.c = beta;
    V out = push(n);
    const double* av = val(a.id);
    double* ov = val(out.id);
    for (size_t i = 0, N = elems(out.id); i < N; ++i)
        ov[i] = kernels::softplus(av[i], beta);
    check_finite(out.id);
    return out;
}

V Tape::pow_int(V a, int p) {
    check(p >= 1, "pow_int exponent must be >= 1");
    Node n;
    n.op = Op::kPowInt;
    n.a = a.id;
    n.rows = nodes_[a.id].rows;
    n.cols = nodes_[a.id].cols;
    n.i0 = p;
    V out = push(n);
    const double* av = val(a.id);
    double* ov = val(out.id);
    for (size_t i = 0, N = elems(out.id); i < N; ++i)
        ov[i] = kernels::pow_int(av[i], p);
    check_finite(out.id);
    return out;
}

V Tape::matmul_nt(V a, V b) {
    const Node na = nodes_[a.id];
    const Node nb = nodes_[b.id];
    check(na.cols == nb.cols, "matmul_nt: inner dims ", na.cols, " vs ", nb.cols);
    Node n;
    n.op = Op::kMatmulNT;
    n.a = a.id;
    n.b = b.id;
    n.rows = na.rows;
    n.cols = nb.rows;
    V out = push(n);
    kernels::gemm_nt_acc(val(a.id), val(b.id), val(out.id), na.rows, na.cols, nb.rows);
    check_finite(out.id);
    return out;
}

V Tape::matmul_nn(V a, V b) {
    const Node na = nodes_[a.id];
    const Node nb = nodes_[b.id];
    check(na.cols == nb.rows, "matmul_nn: inner dims ", na.cols, " vs ", nb.rows);
    Node n;
    n.op = Op::kMatmulNN;
    n.a = a.id;
    n.b = b.id;
    n.rows = na.rows;
    n.cols = nb.cols;
    V out = push(n);
    kernels::gemm_nn_acc(val(a.id), val(b.id), val(out.id), na.rows, na.cols, nb.cols);
    check_finite(out.id);
    return out;
}

V Tape::sum(V a) {
    Node n;
    n.op = Op::kSum;
    n.a = a.id;
    n.rows = 1;
    n.cols = 1;
    V out = push(n);
    const double* av = val(a.id);
    double s = 0;
    for (size_t i = 0, N = elems(a.id); i < N; ++i)
        s += av[i];
    val(out.id)[0] = s;
    check_finite(out.id);
    return out;
}

V Tape::dot(V a, V b) {
    check(elems(a.id) == elems(b.id), "dot: size mismatch");
    Node n;
    n.op = Op::kDot;
    n.a = a.id;
    n.b = b.id;
    n.rows = 1;
    n.cols = 1;
    V out = push(n);
    const double* av = val(a.id);
    const double* bv = val(b.id);
    double s = 0;
    for (size_t i = 0, N = elems(a.id); i < N; ++i)
        s += av[i] * bv[i];
    val(out.id)[0] = s;
    check_finite(out.id);
    return out;
}

V Tape::rowdot(V a, V b) {
    const Node na = nodes_[a.id];
    const Node nb = nodes_[b.id];
    check(nb.cols == na.cols && (nb.rows == na.rows || nb.rows == 1),
          "rowdot: shape mismatch");
    Node n;
    n.op = Op::kRowDot;
    n.a = a.id;
    n.b = b.id;
    n.rows = na.rows;
    n.cols = 1;
    V out = push(n);
    const double* av = val(a.id);
    const double* bv = val(b.id);
    double* ov = val(out.id);
    for (int i = 0; i < na.rows; ++i) {
        const double* ar = av + static_cast<size_t>(i) * na.cols;
        const double* br = bv + (nb.rows == 1 ? 0 : static_cast<size_t>(i) * na.cols);
        double s = 0;
        for (int j = 0; j < na.cols; ++j)
            s += ar[j] * br[j];
        ov[i] = s;
    }
    check_finite(out.id);
    return out;
}

V Tape::rownorm(V a) {
    const Node na = nodes_[a.id];
    Node n;
    n.op = Op::kRowNorm;
    n.a = a.id;
    n.rows = na.rows;
    n.cols = 1;
    V out = push(n);
    const double* av = val(a.id);
    double* ov = val(out.id);
    for (int i = 0; i < na.rows; ++i) {
        const double* ar = av + static_cast<size_t>(i) * na.cols;
        double s = 0;
        for (int j = 0; j < na.cols; ++j)
            s += ar[j] * ar[j];
        ov[i] = std::sqrt(s);
    }
    check_finite(out.id);
    return out;
}

V Tape::normalize_rows(V a, double eps) {
    const Node na = nodes_[a.id];
    Node n;
    n.op = Op::kNormalizeRows;
    n.a = a.id;
    n.rows = na.rows;
    n.cols = na.cols;
    n.c = eps;
    V out = push(n);
    const double* av = val(a.id);
    double* ov = val(out.id);
    for (int i = 0; i < na.rows; ++i) {
        const double* ar = av + static_cast<size_t>(i) * na.cols;
        double* orow = ov + static_cast<size_t>(i) * na.cols;
        double s = 0;
        for (int j = 0; j < na.cols; ++j)
            s += ar[j] * ar[j];
        double inv = 1.0 / (std::sqrt(s) + eps);
        for (int j = 0; j < na.cols; ++j)
            orow[j] = ar[j] * inv;
    }
    check_finite(out.id);
    return out;
}

V Tape::select(std::vector<uint8_t> mask, V a, V b) {
    const Node na = nodes_[a.id];
    check(mask.size() == elems(a.id), "select: mask size mismatch");
    Bc bc = classify(na.rows, na.cols, nodes_[b.id].rows, nodes_[b.id].cols);
    Node n;
    n.op = Op::kSelect;
    n.a = a.id;
    n.b = b.id;
    n.rows = na.rows;
    n.cols = na.cols;
    n.aux = static_cast<int>(aux_masks_.size());
    aux_masks_.push_back(std::move(mask));
    V out = push(n);
    const auto& m = aux_masks_[nodes_[out.id].aux];
    const double* av = val(a.id);
    const double* bv = val(b.id);
    double* ov = val(out.id);
    for (int i = 0; i < na.rows; ++i)
        for (int j = 0; j < na.cols; ++j) {
            size_t oi = static_cast<size_t>(i) * na.cols + j;
            ov[oi] = m[oi] ? av[oi] : bv[bindex(bc, i, j, na.cols)];
        }
    check_finite(out.id);
    return out;
}

V Tape::stop_grad(V a) {
    Node n;
    n.op = Op::kStopGrad;
    n.a = a.id;
    n.rows = nodes_[a.id].rows;
    n.cols = nodes_[a.id].cols;
    V out = push(n);
    std::memcpy(val(out.id), val(a.id), sizeof(double) * elems(out.id));
    return out;
}

V Tape::concat_cols(const std::vector<V>& parts) {
    check(!parts.empty(), "concat_cols: empty");
    int rows = nodes_[parts[0].id].rows;
    int cols = 0;
    std::vector<int> ids;
    for (const V& p : parts) {
        check(nodes_[p.id].rows == rows, "concat_cols: row mismatch");
        cols += nodes_[p.id].cols;
        ids.push_back(p.id);
    }
    Node n;
    n.op = Op::kConcatCols;
    n.rows = rows;
    n.cols = cols;
    n.aux = static_cast<int>(aux_lists_.size());
    aux_lists_.push_back(std::move(ids));
    V out = push(n);
    double* ov = val(out.id);
    int c0 = 0;
    for (int pid : aux_lists_[nodes_[out.id].aux]) {
        int pc = nodes_[pid].cols;
        const double* pv = val(pid);
        for (int i = 0; i < rows; ++i)
            std::memcpy(ov + static_cast<size_t>(i) * cols + c0,
                        pv + static_cast<size_t>(i) * pc, sizeof(double) * pc);
        c0 += pc;
    }
    check_finite(out.id);
    return out;
}

V Tape::slice_cols(V a, int c0, int c1) {
    const Node na = nodes_[a.id];
    check(0 <= c0 && c0 < c1 && c1 <= na.cols, "slice_cols: bad range");
    Node n;
    n.op = Op::kSliceCols;
    n.a = a.id;
    n.rows = na.rows;
    n.cols = c1 - c0;
    n.i0 = c0;
    n.i1 = c1;
    V out = push(n);
    const double* av = val(a.id);
    double* ov = val(out.id);
    for (int i = 0; i < na.rows; ++i)
        std::memcpy(ov + static_cast<size_t>(i) * (c1 - c0),
                    av + static_cast<size_t>(i) * na.cols + c0, sizeof(double) * (c1 - c0));
    return out;
}

V Tape::slice_rows(V a, int r0, int r1) {
    const Node na = nodes_[a.id];
    check(0 <= r0 && r0 < r1 && r1 <= na.rows, "slice_rows: bad range");
    Node n;
    n.op = Op::kSliceRows;
    n.a = a.id;
    n.rows = r1 - r0;
    n.cols = na.cols;
    n.i0 = r0;
    n.i1 = r1;
    V out = push(n);
    std::memcpy(val(out.id), val(a.id) + static_cast<size_t>(r0) * na.cols,
                sizeof(double) * elems(out.id));
    return out;
}

V Tape::repeat_rows(V a, int nrep) {
    const Node na = nodes_[a.id];
    check(na.rows == 1, "repeat_rows: input must be a single row");
    Node n;
    n.op = Op::kRepeatRows;
    n.a = a.id;
    n.rows = nrep;
    n.cols = na.cols;
    V out = push(n);
    double* ov = val(out.id);
    for (int i = 0; i < nrep; ++i)
        std::memcpy(ov + static_cast<size_t>(i) * na.cols, val(a.id),
                    sizeof(double) * na.cols);
    return out;
}

V Tape::reshape(V a, int rows, int cols) {
    check(static_cast<size_t>(rows) * cols == elems(a.id), "reshape: size mismatch");
    Node n;
    n.op = Op::kReshape;
    n.a = a.id;
    n.rows = rows;
    n.cols = cols;
    V out = push(n);
    std::memcpy(val(out.id), val(a.id), sizeof(double) * elems(out.id));
    return out;
}

V Tape::hash_encode(const HashGrid& grid, V x) {
    const Node nx = nodes_[x.id];
    check(nx.cols == 3, "hash_encode: positions must be n x 3");
    Node n;
    n.op = Op::kHashEnc;
    n.a = x.id;
    n.rows = nx.rows;
    n.cols = grid.output_dim();
    n.grid = &grid;
    V out = push(n);
    grid.forward(store_->values.data(), val(x.id), nx.rows, val(out.id));
    check_finite(out.id);
    return out;
}

V Tape::hash_jacvec(const HashGrid& grid, V x, V r) {
    const Node nx = nodes_[x.id];
    const Node nr = nodes_[r.id];
    check(nx.cols == 3, "hash_jacvec: positions must be n x 3");
    check(nr.rows == nx.rows && nr.cols == grid.output_dim(), "hash_jacvec: bad r shape");
    Node n;
    n.op = Op::kHashJacVec;
    n.a = x.id;
    n.b = r.id;
    n.rows = nx.rows;
    n.cols = 3;
    n.grid = &grid;
    V out = push(n);
    grid.jacvec(store_->values.data(), val(x.id), nx.rows, val(r.id), val(out.id));
    check_finite(out.id);
    return out;
}

V Tape::transmit_weights(V alpha) {
    const Node na = nodes_[alpha.id];
    check(na.cols == 1, "transmit_weights: alpha must be n x 1");
    Node n;
    n.op = Op::kTransmitWeights;
    n.a = alpha.id;
    n.rows = na.rows;
    n.cols = 1;
    V out = push(n);
    const double* a = val(alpha.id);
    double* w = val(out.id);
    double T = 1.0;
    for (int k = 0; k < na.rows; ++k) {
        w[k] = T * a[k];
        T *= (1.0 - a[k]);
    }
    check_finite(out.id);
    return out;
}

void Tape::backward(V root, const Mat& seed) {
    check(root.tape == this, "backward: node from another tape");
    check(seed.rows == nodes_[root.id].rows && seed.cols == nodes_[root.id].cols,
          "backward: seed shape mismatch (expected ", nodes_[root.id].rows, "x",
          nodes_[root.id].cols, ", got ", seed.rows, "x", seed.cols, ")");
    check(sink_ != nullptr, "backward: no gradient sink");
    adj_.assign(vals_.size(), 0.0);
    std::memcpy(adj(root.id), seed.data(), sizeof(double) * elems(root.id));
    for (int id = root.id; id >= 0; --id)
        backprop_node(id);
}

void Tape::backward_scalar(V root, double seed) {
    check(elems(root.id) == 1, "backward_scalar: root is not scalar");
    backward(root, Mat::scalar(seed));
}

void Tape::backprop_node(int id) {
    Node& n = nodes_[id];
    const double* g = adj(id);
    // Skip nodes with an all-zero adjoint cheaply: most graphs are narrow.
    {
        bool any = false;
        for (size_t i = 0, N = elems(id); i < N; ++i)
            if (g[i] != 0.0) {
                any = true;
                break;
            }
        if (!any)
            return;
    }
    int R = n.rows, C = n.cols;
    switch (n.op) {
    case Op::kConst:
        break;
    case Op::kParam: {
        for (size_t i = 0, N = elems(id); i < N; ++i)
            sink_[n.poff + i] += g[i];
        break;
    }
    case Op::kAdd: {
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += g[i];
        accumulate_broadcast(n.b, R, C, g);
        break;
    }
    case Op::kSub: {
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += g[i];
        std::vector<double> neg(elems(id));
        for (size_t i = 0; i < neg.size(); ++i)
            neg[i] = -g[i];
        accumulate_broadcast(n.b, R, C, neg.data());
        break;
    }
    case Op::kMul: {
        const Node nb = nodes_[n.b];
        Bc bc = classify(R, C, nb.rows, nb.cols);
        const double* av = val(n.a);
        const double* bv = val(n.b);
        double* da = adj(n.a);
        std::vector<double> gb(elems(id));
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) {
                size_t oi = static_cast<size_t>(i) * C + j;
                da[oi] += g[oi] * bv[bindex(bc, i, j, C)];
                gb[oi] = g[oi] * av[oi];
            }
        accumulate_broadcast(n.b, R, C, gb.data());
        break;
    }
    case Op::kDiv: {
        const Node nb = nodes_[n.b];
        Bc bc = classify(R, C, nb.rows, nb.cols);
        const double* av = val(n.a);
        const double* bv = val(n.b);
        double* da = adj(n.a);
        std::vector<double> gb(elems(id));
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) {
                size_t oi = static_cast<size_t>(i) * C + j;
                double y = bv[bindex(bc, i, j, C)];
                da[oi] += g[oi] / y;
                gb[oi] = -g[oi] * av[oi] / (y * y);
            }
        accumulate_broadcast(n.b, R, C, gb.data());
        break;
    }
    case Op::kScale: {
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += n.c * g[i];
        break;
    }
    case Op::kAddScalar:
    case Op::kReshape: {
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += g[i];
        break;
    }
    case Op::kMatmulNT: {
        const Node na = nodes_[n.a];
        const Node nb = nodes_[n.b];
        kernels::gemm_nn_acc(g, val(n.b), adj(n.a), R, C, na.cols);
        kernels::gemm_tn_acc(g, val(n.a), adj(n.b), R, C, nb.cols);
        break;
    }
    case Op::kMatmulNN: {
        const Node na = nodes_[n.a];
        kernels::gemm_nt_acc(g, val(n.b), adj(n.a), R, C, na.cols);
        kernels::gemm_tn_acc(val(n.a), g, adj(n.b), na.rows, na.cols, C);
        break;
    }
    case Op::kSoftplus: {
        const double* av = val(n.a);
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += g[i] * kernels::softplus_grad(av[i], n.c);
        break;
    }
    case Op::kRelu: {
        const double* av = val(n.a);
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += av[i] > 0 ? g[i] : 0.0;
        break;
    }
    case Op::kSigmoid: {
        const double* ov = val(id);
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += g[i] * ov[i] * (1.0 - ov[i]);
        break;
    }
    case Op::kExp: {
        const double* ov = val(id);
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += g[i] * ov[i];
        break;
    }
    case Op::kLog: {
        const double* av = val(n.a);
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += g[i] / av[i];
        break;
    }
    case Op::kAbs: {
        const double* av = val(n.a);
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += av[i] > 0 ? g[i] : (av[i] < 0 ? -g[i] : 0.0);
        break;
    }
    case Op::kPowInt: {
        const double* av = val(n.a);
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[i] += g[i] * n.i0 * kernels::pow_int(av[i], n.i0 - 1);
        break;
    }
    case Op::kSum: {
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(n.a); i < N; ++i)
            da[i] += g[0];
        break;
    }
    case Op::kDot: {
        const double* av = val(n.a);
        const double* bv = val(n.b);
        double* da = adj(n.a);
        double* db = adj(n.b);
        for (size_t i = 0, N = elems(n.a); i < N; ++i) {
            da[i] += g[0] * bv[i];
            db[i] += g[0] * av[i];
        }
        break;
    }
    case Op::kRowDot: {
        const Node na = nodes_[n.a];
        const Node nb = nodes_[n.b];
        const double* av = val(n.a);
        const double* bv = val(n.b);
        double* da = adj(n.a);
        double* db = adj(n.b);
        for (int i = 0; i < na.rows; ++i) {
            size_t ao = static_cast<size_t>(i) * na.cols;
            size_t bo = nb.rows == 1 ? 0 : ao;
            for (int j = 0; j < na.cols; ++j) {
                da[ao + j] += g[i] * bv[bo + j];
                db[bo + j] += g[i] * av[ao + j];
            }
        }
        break;
    }
    case Op::kRowNorm: {
        const Node na = nodes_[n.a];
        const double* av = val(n.a);
        const double* ov = val(id);
        double* da = adj(n.a);
        for (int i = 0; i < na.rows; ++i) {
            double L = ov[i];
            if (L < 1e-300)
                continue;
            size_t ao = static_cast<size_t>(i) * na.cols;
            for (int j = 0; j < na.cols; ++j)
                da[ao + j] += g[i] * av[ao + j] / L;
        }
        break;
    }
    case Op::kNormalizeRows: {
        const Node na = nodes_[n.a];
        const double* av = val(n.a);
        double* da = adj(n.a);
        double eps = n.c;
        for (int i = 0; i < na.rows; ++i) {
            size_t ao = static_cast<size_t>(i) * na.cols;
            double s = 0, gdotx = 0;
            for (int j = 0; j < na.cols; ++j) {
                s += av[ao + j] * av[ao + j];
                gdotx += g[ao + j] * av[ao + j];
            }
            double L = std::sqrt(s);
            double inv = 1.0 / (L + eps);
            for (int j = 0; j < na.cols; ++j) {
                da[ao + j] += g[ao + j] * inv;
                if (L > 1e-300)
                    da[ao + j] -= gdotx * av[ao + j] / (L * (L + eps) * (L + eps));
            }
        }
        break;
    }
    case Op::kSelect: {
        const auto& m = aux_masks_[n.aux];
        double* da = adj(n.a);
        std::vector<double> gb(elems(id), 0.0);
        for (size_t i = 0, N = elems(id); i < N; ++i) {
            if (m[i])
                da[i] += g[i];
            else
                gb[i] = g[i];
        }
        accumulate_broadcast(n.b, R, C, gb.data());
        break;
    }
    case Op::kStopGrad:
        break;
    case Op::kConcatCols: {
        int c0 = 0;
        for (int pid : aux_lists_[n.aux]) {
            const Node np = nodes_[pid];
            double* dp = adj(pid);
            for (int i = 0; i < R; ++i)
                for (int j = 0; j < np.cols; ++j)
                    dp[static_cast<size_t>(i) * np.cols + j] +=
                        g[static_cast<size_t>(i) * C + c0 + j];
            c0 += np.cols;
        }
        break;
    }
    case Op::kSliceCols: {
        const Node na = nodes_[n.a];
        double* da = adj(n.a);
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j)
                da[static_cast<size_t>(i) * na.cols + n.i0 + j] +=
                    g[static_cast<size_t>(i) * C + j];
        break;
    }
    case Op::kSliceRows: {
        double* da = adj(n.a);
        for (size_t i = 0, N = elems(id); i < N; ++i)
            da[static_cast<size_t>(n.i0) * C + i] += g[i];
        break;
    }
    case Op::kRepeatRows: {
        double* da = adj(n.a);
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j)
                da[j] += g[static_cast<size_t>(i) * C + j];
        break;
    }
    case Op::kHashEnc: {
        const Node nx = nodes_[n.a];
        bool x_needs_grad = nodes_[n.a].op != Op::kConst;
        n.grid->backward(store_->values.data(), val(n.a), nx.rows, g, sink_,
                         x_needs_grad ? adj(n.a) : nullptr);
        break;
    }
    case Op::kHashJacVec: {
        const Node nx = nodes_[n.a];
        n.grid->jacvec_backward(store_->values.data(), val(n.a), nx.rows, val(n.b), g, sink_,
                                adj(n.b));
        break;
    }
    case Op::kTransmitWeights: {
        // w_k = T_k a_k. dL/da_m = g_m T_m - sum_{k>m} g_k a_k prod_{j<k, j!=m} (1-a_j).
        // Exact O(N^2) accumulation; avoids dividing by possibly-zero (1-a).
        const double* a = val(n.a);
        double* da = adj(n.a);
        int N = R;
        double Tm = 1.0;
        for (int m = 0; m < N; ++m) {
            double acc = g[m] * Tm;
            double P = Tm; // prod_{j<k, j!=m} (1-a_j), starting at k = m+1
            for (int k = m + 1; k < N; ++k) {
                acc -= g[k] * a[k] * P;
                P *= (1.0 - a[k]);
            }
            da[m] += acc;
            Tm *= (1.0 - a[m]);
        }
        break;
    }
    }
}

} // namespace mvir
