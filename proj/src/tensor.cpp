#include "dconad/tensor.hpp"

#include <sstream>

namespace dconad {

std::string shape_str(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Index shape_size(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<Index> shape, bool requires_grad) {
  for (Index d : shape) {
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->value = Array::Zero(shape_size(shape));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Tensor t(std::vector<Index>{}, requires_grad);
  t.impl_->value[0] = v;
  return t;
}

Tensor Tensor::from_flat(std::vector<Index> shape, Array data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<detail::TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->value = std::move(data);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  Array flat = Eigen::Map<const Array>(m.data(), m.size());
  return from_flat({m.rows(), m.cols()}, std::move(flat), requires_grad);
}

Tensor Tensor::filled(std::vector<Index> shape, double v, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  t.impl_->value.setConstant(v);
  return t;
}

Index Tensor::rows() const {
  if (ndim() != 2) throw ContractError("rows() on tensor of shape " + shape_str(shape()));
  return impl_->shape[0];
}

Index Tensor::cols() const {
  if (ndim() != 2) throw ContractError("cols() on tensor of shape " + shape_str(shape()));
  return impl_->shape[1];
}

ConstMatrixMap Tensor::mat() const {
  if (ndim() != 2) throw ContractError("mat() on tensor of shape " + shape_str(shape()));
  return ConstMatrixMap(impl_->value.data(), impl_->shape[0], impl_->shape[1]);
}

MatrixMap Tensor::mat() {
  if (ndim() != 2) throw ContractError("mat() on tensor of shape " + shape_str(shape()));
  return MatrixMap(impl_->value.data(), impl_->shape[0], impl_->shape[1]);
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->value[0];
}

Array& Tensor::grad() {
  if (impl_->grad.size() != impl_->value.size()) {
    impl_->grad = Array::Zero(impl_->value.size());
  }
  return impl_->grad;
}

const Array* Tensor::grad_if() const {
  if (impl_->grad.size() != impl_->value.size()) return nullptr;
  return &impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_->grad.size() == impl_->value.size()) impl_->grad.setZero();
}

Tensor Tensor::detached_copy() const {
  Tensor t;
  t.impl_ = std::make_shared<detail::TensorImpl>();
  t.impl_->shape = impl_->shape;
  t.impl_->value = impl_->value;
  return t;
}

namespace {
thread_local Tape* tl_active_tape = nullptr;
}

Tape::Tape() {
  prev_ = tl_active_tape;
  tl_active_tape = this;
}

Tape::~Tape() { tl_active_tape = prev_; }

Tape* Tape::active() { return tl_active_tape; }

void Tape::record(const Tensor& output, std::vector<Tensor> inputs, std::function<void(Tape&)> pull) {
  output.impl()->tracked = true;
  nodes_.push_back(Node{output, std::move(inputs), std::move(pull)});
}

Array& Tape::adjoint(const Tensor& t) {
  auto& impl = *t.impl();
  if (impl.adjoint_epoch != epoch_) {
    if (impl.adjoint.size() != impl.value.size()) {
      impl.adjoint = Array::Zero(impl.value.size());
    } else {
      impl.adjoint.setZero();
    }
    impl.adjoint_epoch = epoch_;
  }
  return impl.adjoint;
}

MatrixMap Tape::adjoint_mat(const Tensor& t) {
  Array& a = adjoint(t);
  return MatrixMap(a.data(), t.shape()[0], t.shape()[1]);
}

bool Tape::adjoint_fresh(const Tensor& t) const {
  return t.impl()->adjoint_epoch == epoch_ && t.impl()->adjoint.size() == t.size();
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward expects a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  ++epoch_;
  adjoint(loss)[0] = 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!adjoint_fresh(it->out)) continue;  // zero adjoint: nothing to propagate
    it->pull(*this);
  }

  // Flush sweep adjoints into the persistent grads of requires_grad leaves.
  // Each impl is flushed at most once per sweep.
  auto flush = [this](const Tensor& t) {
    auto& impl = *t.impl();
    if (!impl.requires_grad || impl.adjoint_epoch != epoch_) return;
    if (impl.grad.size() != impl.value.size()) impl.grad = Array::Zero(impl.value.size());
    impl.grad += impl.adjoint;
    impl.adjoint_epoch = 0;  // consumed
  };
  flush(loss);
  for (const auto& node : nodes_) {
    for (const auto& in : node.ins) flush(in);
    flush(node.out);
  }
}

}  // namespace dconad
