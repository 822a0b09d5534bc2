#pragma once

// Reverse-mode automatic differentiation over dense row-major double matrices.
//
// A Tape records every primitive in creation order, so node ids are already a
// topological order. Tensors are lightweight handles (tape, node id); their
// values live on the tape. Gradients can be computed eagerly (backward) or as
// new tape nodes (input_gradient), which makes gradient-of-gradient available
// for penalties such as (||grad_x D(x)|| - 1)^2.
//
// Derivative convention at kinks: leaky_relu and abs take the left-hand value
// at 0 (slope and -1 respectively).

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace ganlab::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;
using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,
    LeakyRelu,
    Sigmoid,
    Log,
    Square,
    Abs,
    Sqrt,
    Sum,
    Mean,
    PseudoHuber,
};

const char* op_name(Op op) noexcept;

// Reduction axis for sum(): Rows collapses the row index (result 1 x n),
// Cols collapses the column index (result m x 1).
enum class Axis : std::uint8_t { All, Rows, Cols };

class Tape;

class Tensor {
public:
    Tensor() = default;

    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
    const Matrix& value() const;
    double item() const;
    bool requires_grad() const;

    NodeId id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Tensor(Tape* tape, NodeId id, std::uint32_t generation)
      : tape_(tape), id_(id), generation_(generation)
    { }

    Tape* tape_ = nullptr;
    NodeId id_ = 0;
    std::uint32_t generation_ = 0;
};

// Result of backward(): one gradient per node that requires it.
class Gradients {
public:
    // Gradient of the loss with respect to t. Tracked leaves that the loss
    // does not depend on yield zeros.
    const Matrix& operator[](const Tensor& t) const;
    bool contains(const Tensor& t) const;

private:
    friend class Tape;
    std::vector<Matrix> grads_;
    std::vector<char> present_;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf whose gradient backward() reports.
    Tensor variable(const Matrix& value);
    // Leaf treated as a constant: no gradient flows into it.
    Tensor constant(const Matrix& value);
    Tensor filled(Index rows, Index cols, double value);

    // Drops all nodes. Node storage is kept and reused, so steady-state
    // training loops do not reallocate. Existing Tensors become invalid.
    void clear() noexcept;
    std::size_t size() const noexcept { return size_; }

    void backward(const Tensor& loss, Gradients& out) const;

    // Smallest |input| over all leaky_relu and abs nodes; +inf if none.
    double min_kink_distance() const;

    // Primitive construction, used by the free functions below.
    Tensor record(Op op, const Tensor& a, double param = 0.0, std::uint8_t flags = 0);
    Tensor record(Op op, const Tensor& a, const Tensor& b, std::uint8_t flags = 0);

    Tensor input_gradient(const Tensor& output, const Tensor& input);

private:
    friend class Tensor;

    struct Node {
        Op op = Op::Leaf;
        NodeId a = kNone;
        NodeId b = kNone;
        std::uint8_t flags = 0;
        bool requires_grad = false;
        double param = 0.0;
        Matrix value;
    };

    static constexpr NodeId kNone = 0xffffffffu;

    NodeId allocate();
    Tensor handle(NodeId id) { return Tensor(this, id, generation_); }
    void check(const Tensor& t) const;
    Tensor leaf(const Matrix& value, bool requires_grad);
    Tensor vjp_taped(NodeId id, const Tensor& g, int which);

    std::vector<Node> nodes_;
    std::size_t size_ = 0;
    std::uint32_t generation_ = 1;
};

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);
// b may match a's shape or broadcast as a row (1 x n), a column (m x 1) or a scalar (1 x 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor leaky_relu(const Tensor& a, double slope);

Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sum(const Tensor& a, Axis axis = Axis::All);
Tensor mean(const Tensor& a);
// sqrt(a^2 + 1) - 1
Tensor pseudo_huber_unit(const Tensor& a);

// Plain-matrix helpers shared with tape-free forward passes.
Matrix leaky_relu_value(const Matrix& a, double slope);
// `low` where a <= 0, 1 elsewhere.
Matrix step_mask(const Matrix& a, double low);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

Gradients backward(const Tensor& loss);

// d output / d input as a tensor on the same tape, so a later backward()
// differentiates through it.
Tensor input_gradient(const Tensor& output, const Tensor& input);

using ScalarFunction = std::function<Tensor(Tape&, const Tensor&)>;

// Max over coordinates of |analytic - central| / max(1e-12, |analytic| + |central|).
double finite_difference_check(const ScalarFunction& f, const Matrix& x, double eps);

} // namespace ganlab::ad
