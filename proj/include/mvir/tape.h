#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvir/array.h"
#include "mvir/param_store.h"

namespace mvir {

class HashGrid;

// Primitive kinds of the reverse-mode tape. Values are evaluated eagerly at
// node creation; backward walks nodes in reverse creation order, which is a
// reverse topological order by construction.
enum class Op : uint8_t {
    kConst,
    kParam,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kScale,
    kAddScalar,
    kMatmulNT,
    kMatmulNN,
    kSoftplus,
    kRelu,
    kSigmoid,
    kExp,
    kLog,
    kAbs,
    kPowInt,
    kSum,
    kDot,
    kRowDot,
    kRowNorm,
    kNormalizeRows,
    kSelect,
    kStopGrad,
    kConcatCols,
    kSliceCols,
    kSliceRows,
    kRepeatRows,
    kReshape,
    kHashEnc,
    kHashJacVec,
    kTransmitWeights,
};

const char* op_name(Op op);

class Tape;

// Lightweight handle to a tape node.
struct V {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    int rows() const;
    int cols() const;
    std::span<const double> value() const;
    double scalar() const;
};

V operator+(V a, V b);
V operator-(V a, V b);
V operator*(V a, V b);
V operator/(V a, V b);

class Tape {
public:
    // `store` provides parameter values; gradients accumulate into `sink`,
    // which must alias a buffer of store->size() doubles (defaults to the
    // store's own grad accumulator). Distinct sinks let ray shards run in
    // parallel and merge deterministically afterwards.
    explicit Tape(ParamStore* store = nullptr, double* sink = nullptr)
        : store_(store), sink_(sink ? sink : (store ? store->grads.data() : nullptr)) {}

    void reset();

    // Leaves.
    V constant(const Mat& m);
    V constant(int rows, int cols, const double* data);
    V scalar(double v) { return constant(Mat::scalar(v)); }
    V row3(const Vec3& v) { return constant(Mat::row3(v)); }
    V param(size_t offset, int rows, int cols);
    V param(const ParamStore::Group& g, size_t rel_offset, int rows, int cols);

    // Elementwise; b may broadcast as 1x1, 1xcols, or rowsx1.
    V add(V a, V b);
    V sub(V a, V b);
    V mul(V a, V b);
    V div(V a, V b);
    V scale(V a, double c);
    V add_scalar(V a, double c);

    // out = A * B^T, A: n x k, B: m x k.
    V matmul_nt(V a, V b);
    // out = A * B, A: n x k, B: k x m.
    V matmul_nn(V a, V b);

    V softplus(V a, double beta);
    V relu(V a);
    V sigmoid(V a);
    V vexp(V a);
    V vlog(V a);
    V vabs(V a);
    V pow_int(V a, int n);

    V sum(V a);
    V dot(V a, V b);
    // Per-row dot product; b is n x k or a broadcast 1 x k row. Output n x 1.
    V rowdot(V a, V b);
    V rownorm(V a);
    // Rows divided by (norm + eps).
    V normalize_rows(V a, double eps = 1e-12);

    // mask selects a (mask != 0) or b elementwise; mask matches a's shape.
    V select(std::vector<uint8_t> mask, V a, V b);
    V stop_grad(V a);

    V concat_cols(const std::vector<V>& parts);
    V slice_cols(V a, int c0, int c1);
    V slice_rows(V a, int r0, int r1);
    V repeat_rows(V a, int n);
    V reshape(V a, int rows, int cols);

    // Multi-resolution hash encoding of positions x (n x 3, object space in
    // [-1,1]^3). Differentiable w.r.t. the table parameters and x.
    V hash_encode(const HashGrid& grid, V x);
    // Per-row product J(x)^T r where J = d(encoding)/dx; r is n x out_dim.
    // Differentiable w.r.t. tables and r; positions are treated as fixed.
    V hash_jacvec(const HashGrid& grid, V x, V r);

    // w_k = T_k * alpha_k with T_k = prod_{m<k} (1 - alpha_m); alpha is n x 1.
    V transmit_weights(V alpha);

    // Accumulates d(seed . root)/d(params) into the gradient sink. May be
    // called repeatedly; contributions add up until the sink is zeroed.
    void backward(V root, const Mat& seed);
    void backward_scalar(V root, double seed = 1.0);

    std::span<const double> value(int id) const;
    int rows(int id) const { return nodes_[id].rows; }
    int cols(int id) const { return nodes_[id].cols; }
    size_t node_count() const { return nodes_.size(); }

    // When set, every freshly computed node value is scanned for NaN/Inf and
    // an Error naming the op kind is thrown on the first hit.
    bool guard_nonfinite = true;

    ParamStore* store() const { return store_; }

private:
    friend struct V;

    struct Node {
        Op op;
        int a = -1, b = -1;
        int rows = 0, cols = 0;
        size_t off = 0;  // value offset into the arena; adjoints mirror it
        double c = 0;    // scalar payload (scale factor, softplus beta, eps)
        int i0 = 0, i1 = 0;
        int aux = -1;            // index into aux_masks_/aux_lists_
        size_t poff = 0;         // kParam: offset into the store
        const HashGrid* grid = nullptr;
    };

    V push(Node n);
    double* val(int id) { return vals_.data() + nodes_[id].off; }
    const double* val(int id) const { return vals_.data() + nodes_[id].off; }
    double* adj(int id) { return adj_.data() + nodes_[id].off; }
    size_t elems(int id) const {
        return static_cast<size_t>(nodes_[id].rows) * nodes_[id].cols;
    }
    void check_finite(int id);
    void backprop_node(int id);

    // Adds g (shaped like the full operand) into the adjoint of node `bid`,
    // reducing over broadcast dimensions if needed.
    void accumulate_broadcast(int bid, int rows, int cols, const double* g);

    ParamStore* store_ = nullptr;
    double* sink_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<double> adj_;
    std::vector<std::vector<uint8_t>> aux_masks_;
    std::vector<std::vector<int>> aux_lists_;
};

} // namespace mvir
