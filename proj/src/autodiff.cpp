#include "ganlab/autodiff.hpp"

#include "ganlab/errors.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace ganlab::ad {

namespace {

// Broadcast kind of the second operand of add/sub, stored in Node::flags.
enum Broadcast : std::uint8_t { kSame = 0, kRow = 1, kCol = 2, kScalar = 3 };

constexpr std::uint8_t kTransposeA = 1;
constexpr std::uint8_t kTransposeB = 2;

std::string shape_of(const Matrix& m)
{
    std::ostringstream os;
    os << '(' << m.rows() << " x " << m.cols() << ')';
    return os.str();
}

[[noreturn]] void shape_error(Op op, const Matrix& a, const Matrix& b)
{
    throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + shape_of(a) + " and " + shape_of(b));
}

[[noreturn]] void domain_error(Op op, const char* what)
{
    throw DomainError(std::string(op_name(op)) + ": " + what);
}

std::uint8_t broadcast_kind(Op op, const Matrix& a, const Matrix& b)
{
    if (a.rows() == b.rows() && a.cols() == b.cols())
        return kSame;
    if (b.rows() == 1 && b.cols() == 1)
        return kScalar;
    if (b.rows() == 1 && b.cols() == a.cols())
        return kRow;
    if (b.cols() == 1 && b.rows() == a.rows())
        return kCol;
    shape_error(op, a, b);
}

template <class Expr>
void accumulate(std::vector<Matrix>& grads, std::vector<char>& present, NodeId id, const Expr& e)
{
    if (present[id]) {
        grads[id].noalias() += e;
    } else {
        grads[id].noalias() = e;
        present[id] = 1;
    }
}

} // namespace

const char* op_name(Op op) noexcept
{
    switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add_broadcast_bias";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul_elementwise";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scalar_mul";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Abs: return "abs";
    case Op::Sqrt: return "sqrt";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::PseudoHuber: return "pseudo_huber_unit";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Tensor / Gradients

const Matrix& Tensor::value() const
{
    assert(tape_ != nullptr);
    tape_->check(*this);
    return tape_->nodes_[id_].value;
}

double Tensor::item() const
{
    const Matrix& v = value();
    if (v.rows() != 1 || v.cols() != 1)
        throw ShapeError("item: tensor is not scalar " + shape_of(v));
    return v(0, 0);
}

bool Tensor::requires_grad() const
{
    tape_->check(*this);
    return tape_->nodes_[id_].requires_grad;
}

const Matrix& Gradients::operator[](const Tensor& t) const
{
    if (!contains(t))
        throw Error("gradient requested for a tensor that does not require one");
    return grads_[t.id()];
}

bool Gradients::contains(const Tensor& t) const
{
    return t.id() < present_.size() && present_[t.id()];
}

// ---------------------------------------------------------------------------
// Tape

NodeId Tape::allocate()
{
    if (size_ == nodes_.size())
        nodes_.emplace_back();
    Node& n = nodes_[size_];
    n.op = Op::Leaf;
    n.a = kNone;
    n.b = kNone;
    n.flags = 0;
    n.requires_grad = false;
    n.param = 0.0;
    return static_cast<NodeId>(size_++);
}

void Tape::check(const Tensor& t) const
{
    if (t.tape_ != this || t.generation_ != generation_ || t.id_ >= size_)
        throw Error("tensor does not belong to the current contents of this tape");
}

void Tape::clear() noexcept
{
    size_ = 0;
    ++generation_;
}

Tensor Tape::leaf(const Matrix& value, bool requires_grad)
{
    const NodeId id = allocate();
    nodes_[id].value = value;
    nodes_[id].requires_grad = requires_grad;
    return handle(id);
}

Tensor Tape::variable(const Matrix& value) { return leaf(value, true); }

Tensor Tape::constant(const Matrix& value) { return leaf(value, false); }

Tensor Tape::filled(Index rows, Index cols, double value)
{
    const NodeId id = allocate();
    nodes_[id].value.setConstant(rows, cols, value);
    return handle(id);
}

double Tape::min_kink_distance() const
{
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size_; ++i) {
        const Node& n = nodes_[i];
        if (n.op == Op::LeakyRelu || n.op == Op::Abs)
            margin = std::min(margin, nodes_[n.a].value.cwiseAbs().minCoeff());
    }
    return margin;
}

Tensor Tape::record(Op op, const Tensor& ta, double param, std::uint8_t flags)
{
    check(ta);
    const NodeId ia = ta.id_;
    {
        const Matrix& a = nodes_[ia].value;
        if (op == Op::Log && !(a.array() > 0.0).all())
            domain_error(op, "input must be strictly positive");
        if (op == Op::Sqrt && !(a.array() >= 0.0).all())
            domain_error(op, "input must be non-negative");
    }

    const NodeId id = allocate();
    Node& n = nodes_[id];
    const Matrix& a = nodes_[ia].value;
    n.op = op;
    n.a = ia;
    n.param = param;
    n.flags = flags;
    n.requires_grad = nodes_[ia].requires_grad;

    switch (op) {
    case Op::Neg: n.value = -a; break;
    case Op::Scale: n.value = param * a; break;
    case Op::LeakyRelu: n.value = leaky_relu_value(a, param); break;
    case Op::Sigmoid: n.value = (1.0 / (1.0 + (-a.array()).exp())).matrix(); break;
    case Op::Log: n.value = a.array().log().matrix(); break;
    case Op::Square: n.value = a.array().square().matrix(); break;
    case Op::Abs: n.value = a.cwiseAbs(); break;
    case Op::Sqrt: n.value = a.cwiseSqrt(); break;
    case Op::PseudoHuber: n.value = ((a.array().square() + 1.0).sqrt() - 1.0).matrix(); break;
    case Op::Mean: n.value.setConstant(1, 1, a.mean()); break;
    case Op::Sum:
        switch (static_cast<Axis>(flags)) {
        case Axis::All: n.value.setConstant(1, 1, a.sum()); break;
        case Axis::Rows: n.value = a.colwise().sum(); break;
        case Axis::Cols: n.value = a.rowwise().sum(); break;
        }
        break;
    default:
        throw Error(std::string("record: ") + op_name(op) + " is not a unary primitive");
    }
    return handle(id);
}

Tensor Tape::record(Op op, const Tensor& ta, const Tensor& tb, std::uint8_t flags)
{
    check(ta);
    check(tb);
    const NodeId ia = ta.id_;
    const NodeId ib = tb.id_;
    {
        const Matrix& a = nodes_[ia].value;
        const Matrix& b = nodes_[ib].value;
        switch (op) {
        case Op::MatMul: {
            const Index inner_a = (flags & kTransposeA) ? a.rows() : a.cols();
            const Index inner_b = (flags & kTransposeB) ? b.cols() : b.rows();
            if (inner_a != inner_b)
                shape_error(op, a, b);
            break;
        }
        case Op::Add:
        case Op::Sub:
            flags = broadcast_kind(op, a, b);
            break;
        case Op::Mul:
        case Op::Div:
            if (a.rows() != b.rows() || a.cols() != b.cols())
                shape_error(op, a, b);
            if (op == Op::Div && !(b.array() != 0.0).all())
                domain_error(op, "division by zero");
            break;
        default:
            throw Error(std::string("record: ") + op_name(op) + " is not a binary primitive");
        }
    }

    const NodeId id = allocate();
    Node& n = nodes_[id];
    const Matrix& a = nodes_[ia].value;
    const Matrix& b = nodes_[ib].value;
    n.op = op;
    n.a = ia;
    n.b = ib;
    n.flags = flags;
    n.requires_grad = nodes_[ia].requires_grad || nodes_[ib].requires_grad;

    switch (op) {
    case Op::MatMul:
        switch (flags) {
        case 0: n.value.noalias() = a * b; break;
        case kTransposeA: n.value.noalias() = a.transpose() * b; break;
        case kTransposeB: n.value.noalias() = a * b.transpose(); break;
        default: n.value.noalias() = a.transpose() * b.transpose(); break;
        }
        break;
    case Op::Add:
    case Op::Sub: {
        const double sign = op == Op::Add ? 1.0 : -1.0;
        n.value = a;
        switch (flags) {
        case kSame: n.value += sign * b; break;
        case kRow: n.value.rowwise() += sign * b.row(0); break;
        case kCol: n.value.colwise() += sign * b.col(0); break;
        case kScalar: n.value.array() += sign * b(0, 0); break;
        }
        break;
    }
    case Op::Mul: n.value = a.cwiseProduct(b); break;
    case Op::Div: n.value = a.cwiseQuotient(b); break;
    default: break;
    }
    return handle(id);
}

// ---------------------------------------------------------------------------
// Eager reverse pass

void Tape::backward(const Tensor& loss, Gradients& out) const
{
    check(loss);
    const Matrix& lv = nodes_[loss.id_].value;
    if (lv.rows() != 1 || lv.cols() != 1)
        throw ShapeError("backward: loss must be scalar, got " + shape_of(lv));

    auto& grads = out.grads_;
    auto& present = out.present_;
    if (grads.size() < size_)
        grads.resize(size_);
    present.assign(size_, 0);

    grads[loss.id_].setOnes(1, 1);
    present[loss.id_] = 1;

    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        const NodeId id = static_cast<NodeId>(i);
        const Node& n = nodes_[id];
        if (!present[id] || n.op == Op::Leaf || !n.requires_grad)
            continue;
        const Matrix& g = grads[id];
        const Matrix& a = nodes_[n.a].value;
        const bool want_a = nodes_[n.a].requires_grad;
        const bool want_b = n.b != kNone && nodes_[n.b].requires_grad;

        auto acc = [&](NodeId target, const auto& e) { accumulate(grads, present, target, e); };

        switch (n.op) {
        case Op::MatMul: {
            const Matrix& b = nodes_[n.b].value;
            switch (n.flags) {
            case 0:
                if (want_a) acc(n.a, g * b.transpose());
                if (want_b) acc(n.b, a.transpose() * g);
                break;
            case kTransposeA:
                if (want_a) acc(n.a, b * g.transpose());
                if (want_b) acc(n.b, a * g);
                break;
            case kTransposeB:
                if (want_a) acc(n.a, g * b);
                if (want_b) acc(n.b, g.transpose() * a);
                break;
            default:
                if (want_a) acc(n.a, b.transpose() * g.transpose());
                if (want_b) acc(n.b, g.transpose() * a.transpose());
                break;
            }
            break;
        }
        case Op::Add:
        case Op::Sub: {
            if (want_a)
                acc(n.a, g);
            if (want_b) {
                const double sign = n.op == Op::Add ? 1.0 : -1.0;
                switch (n.flags) {
                case kSame: acc(n.b, sign * g); break;
                case kRow: acc(n.b, sign * g.colwise().sum()); break;
                case kCol: acc(n.b, sign * g.rowwise().sum()); break;
                case kScalar: acc(n.b, Matrix::Constant(1, 1, sign * g.sum())); break;
                }
            }
            break;
        }
        case Op::Mul: {
            const Matrix& b = nodes_[n.b].value;
            if (want_a) acc(n.a, g.cwiseProduct(b));
            if (want_b) acc(n.b, g.cwiseProduct(a));
            break;
        }
        case Op::Div: {
            const Matrix& b = nodes_[n.b].value;
            if (want_a) acc(n.a, g.cwiseQuotient(b));
            if (want_b) acc(n.b, (-g.array() * n.value.array() / b.array()).matrix());
            break;
        }
        case Op::Neg: acc(n.a, -g); break;
        case Op::Scale: acc(n.a, n.param * g); break;
        case Op::LeakyRelu:
            acc(n.a, (g.array() * ((a.array() > 0.0).cast<double>() * (1.0 - n.param) + n.param)).matrix());
            break;
        case Op::Sigmoid:
            acc(n.a, (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
            break;
        case Op::Log: acc(n.a, g.cwiseQuotient(a)); break;
        case Op::Square: acc(n.a, (2.0 * g.array() * a.array()).matrix()); break;
        case Op::Abs:
            acc(n.a, (g.array() * ((a.array() > 0.0).cast<double>() * 2.0 - 1.0)).matrix());
            break;
        case Op::Sqrt: acc(n.a, (g.array() / (2.0 * n.value.array())).matrix()); break;
        case Op::PseudoHuber: acc(n.a, (g.array() * a.array() / (n.value.array() + 1.0)).matrix()); break;
        case Op::Sum:
            switch (static_cast<Axis>(n.flags)) {
            case Axis::All: acc(n.a, Matrix::Constant(a.rows(), a.cols(), g(0, 0))); break;
            case Axis::Rows: acc(n.a, g.replicate(a.rows(), 1)); break;
            case Axis::Cols: acc(n.a, g.replicate(1, a.cols())); break;
            }
            break;
        case Op::Mean:
            acc(n.a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / static_cast<double>(a.size())));
            break;
        case Op::Leaf: break;
        }
    }

    // Tracked leaves the loss does not reach get an explicit zero gradient.
    for (std::size_t i = 0; i <= loss.id_; ++i) {
        const Node& n = nodes_[i];
        if (n.op == Op::Leaf && n.requires_grad && !present[i]) {
            grads[i].setZero(n.value.rows(), n.value.cols());
            present[i] = 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Taped reverse pass (gradients as tape nodes)

Tensor Tape::vjp_taped(NodeId id, const Tensor& g, int which)
{
    // Copy what we need: creating nodes below may reallocate nodes_.
    const Op op = nodes_[id].op;
    const NodeId ia = nodes_[id].a;
    const NodeId ib = nodes_[id].b;
    const std::uint8_t flags = nodes_[id].flags;
    const double param = nodes_[id].param;
    const Tensor a = handle(ia);
    const Tensor y = handle(id);

    switch (op) {
    case Op::MatMul: {
        const Tensor b = handle(ib);
        switch (flags) {
        case 0: return which == 0 ? matmul(g, b, false, true) : matmul(a, g, true, false);
        case kTransposeA: return which == 0 ? matmul(b, g, false, true) : matmul(a, g);
        case kTransposeB: return which == 0 ? matmul(g, b) : matmul(g, a, true, false);
        default: return which == 0 ? matmul(b, g, true, true) : matmul(g, a, true, true);
        }
    }
    case Op::Add:
    case Op::Sub: {
        if (which == 0)
            return g;
        Tensor reduced = g;
        switch (flags) {
        case kSame: break;
        case kRow: reduced = sum(g, Axis::Rows); break;
        case kCol: reduced = sum(g, Axis::Cols); break;
        case kScalar: reduced = sum(g, Axis::All); break;
        }
        return op == Op::Add ? reduced : neg(reduced);
    }
    case Op::Mul: return which == 0 ? mul(g, handle(ib)) : mul(g, a);
    case Op::Div: {
        const Tensor g_over_b = div(g, handle(ib));
        return which == 0 ? g_over_b : neg(mul(g_over_b, y));
    }
    case Op::Neg: return neg(g);
    case Op::Scale: return scale(g, param);
    case Op::LeakyRelu: {
        const Matrix& av = nodes_[ia].value;
        Matrix mask = step_mask(av, param);
        return mul(g, constant(mask));
    }
    case Op::Abs: {
        const Matrix& av = nodes_[ia].value;
        Matrix sign = step_mask(av, -1.0);
        return mul(g, constant(sign));
    }
    case Op::Sigmoid: {
        const Tensor one_minus_y = neg(sub(y, filled(1, 1, 1.0)));
        return mul(g, mul(y, one_minus_y));
    }
    case Op::Log: return div(g, a);
    case Op::Square: return scale(mul(g, a), 2.0);
    case Op::Sqrt: return div(g, scale(y, 2.0));
    case Op::PseudoHuber: return mul(g, div(a, add(y, filled(1, 1, 1.0))));
    case Op::Sum:
    case Op::Mean: {
        const Index r = nodes_[ia].value.rows();
        const Index c = nodes_[ia].value.cols();
        const Tensor spread = add(filled(r, c, 0.0), g);
        return op == Op::Mean ? scale(spread, 1.0 / static_cast<double>(r * c)) : spread;
    }
    case Op::Leaf: break;
    }
    throw Error("vjp: leaf has no inputs");
}

Tensor Tape::input_gradient(const Tensor& output, const Tensor& input)
{
    check(output);
    check(input);
    const NodeId in = input.id_;
    const NodeId out = output.id_;
    {
        const Matrix& ov = nodes_[out].value;
        if (ov.rows() != 1 || ov.cols() != 1)
            throw ShapeError("input_gradient: output must be scalar, got " + shape_of(ov));
    }
    if (in > out)
        throw Error("input_gradient: input is not an ancestor of output");

    // Nodes in [in, out] that depend on the input.
    const std::size_t span = out - in + 1;
    std::vector<char> depends(span, 0);
    depends[0] = 1;
    for (NodeId id = in + 1; id <= out; ++id) {
        const Node& n = nodes_[id];
        const bool via_a = n.a != kNone && n.a >= in && depends[n.a - in];
        const bool via_b = n.b != kNone && n.b >= in && depends[n.b - in];
        depends[id - in] = via_a || via_b;
    }
    if (!depends[span - 1])
        throw Error("input_gradient: input is not an ancestor of output");

    std::vector<Tensor> grads(span);
    grads[span - 1] = filled(1, 1, 1.0);
    for (NodeId id = out; id > in; --id) {
        if (!depends[id - in] || !grads[id - in].valid())
            continue;
        const NodeId parents[2] = {nodes_[id].a, nodes_[id].b};
        for (int which = 0; which < 2; ++which) {
            const NodeId p = parents[which];
            if (p == kNone || p < in || !depends[p - in])
                continue;
            Tensor contribution = vjp_taped(id, grads[id - in], which);
            Tensor& slot = grads[p - in];
            slot = slot.valid() ? add(slot, contribution) : contribution;
        }
    }
    return grads[0];
}

// ---------------------------------------------------------------------------
// Free functions

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b)
{
    const auto flags = static_cast<std::uint8_t>((transpose_a ? kTransposeA : 0) | (transpose_b ? kTransposeB : 0));
    return a.tape()->record(Op::MatMul, a, b, flags);
}

Tensor add(const Tensor& a, const Tensor& b) { return a.tape()->record(Op::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return a.tape()->record(Op::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return a.tape()->record(Op::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return a.tape()->record(Op::Div, a, b); }
Tensor neg(const Tensor& a) { return a.tape()->record(Op::Neg, a); }
Tensor scale(const Tensor& a, double factor) { return a.tape()->record(Op::Scale, a, factor); }
Matrix leaky_relu_value(const Matrix& a, double slope)
{
    if (slope >= 0.0 && slope <= 1.0)
        return a.cwiseMax(slope * a);
    return (a.array() * step_mask(a, slope).array()).matrix();
}

Matrix step_mask(const Matrix& a, double low)
{
    return ((a.array() > 0.0).cast<double>() * (1.0 - low) + low).matrix();
}

Tensor leaky_relu(const Tensor& a, double slope) { return a.tape()->record(Op::LeakyRelu, a, slope); }
Tensor sigmoid(const Tensor& a) { return a.tape()->record(Op::Sigmoid, a); }
Tensor log(const Tensor& a) { return a.tape()->record(Op::Log, a); }
Tensor square(const Tensor& a) { return a.tape()->record(Op::Square, a); }
Tensor abs(const Tensor& a) { return a.tape()->record(Op::Abs, a); }
Tensor sqrt(const Tensor& a) { return a.tape()->record(Op::Sqrt, a); }
Tensor mean(const Tensor& a) { return a.tape()->record(Op::Mean, a); }
Tensor pseudo_huber_unit(const Tensor& a) { return a.tape()->record(Op::PseudoHuber, a); }

Tensor sum(const Tensor& a, Axis axis)
{
    return a.tape()->record(Op::Sum, a, 0.0, static_cast<std::uint8_t>(axis));
}

Gradients backward(const Tensor& loss)
{
    if (!loss.valid())
        throw Error("backward: loss is not on a tape");
    Gradients g;
    loss.tape()->backward(loss, g);
    return g;
}

Tensor input_gradient(const Tensor& output, const Tensor& input)
{
    if (!output.valid())
        throw Error("input_gradient: output is not on a tape");
    return output.tape()->input_gradient(output, input);
}

double finite_difference_check(const ScalarFunction& f, const Matrix& x, double eps)
{
    if (!(eps > 0.0))
        throw DomainError("finite_difference_check: eps must be positive");

    Tape tape;
    const Tensor xt = tape.variable(x);
    const Tensor loss = f(tape, xt);
    const Matrix analytic = backward(loss)[xt];

    double worst = 0.0;
    Matrix probe = x;
    for (Index i = 0; i < x.size(); ++i) {
        const double saved = probe.data()[i];
        probe.data()[i] = saved + eps;
        Tape up;
        const double f_up = f(up, up.constant(probe)).item();
        probe.data()[i] = saved - eps;
        Tape down;
        const double f_down = f(down, down.constant(probe)).item();
        probe.data()[i] = saved;

        const double central = (f_up - f_down) / (2.0 * eps);
        const double a = analytic.data()[i];
        const double rel = std::abs(a - central) / std::max(1e-12, std::abs(a) + std::abs(central));
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace ganlab::ad
