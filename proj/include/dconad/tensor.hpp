#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dconad/errors.hpp"

namespace dconad {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using Array = Eigen::ArrayXd;

std::string shape_str(const std::vector<Index>& shape);
Index shape_size(const std::vector<Index>& shape);

namespace detail {

struct TensorImpl {
  std::vector<Index> shape;
  Array value;    // flat, row-major
  Array grad;     // persistent accumulated gradient; size 0 until first write
  Array adjoint;  // scratch buffer for one backward sweep
  std::uint64_t adjoint_epoch = 0;
  bool requires_grad = false;
  bool tracked = false;  // produced by an op recorded on the active tape
};

}  // namespace detail

// Dense row-major f64 tensor. A Tensor is a cheap handle: copying it copies
// the handle, not the buffer. Ops are free functions (see ops.hpp) returning
// fresh tensors; when a Tape is active and an input participates in
// differentiation, the op records a backward rule on it.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor of the given shape. An empty shape is a scalar.
  explicit Tensor(std::vector<Index> shape, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_flat(std::vector<Index> shape, Array data, bool requires_grad = false);
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);
  static Tensor filled(std::vector<Index> shape, double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<Index>& shape() const { return impl_->shape; }
  Index ndim() const { return static_cast<Index>(impl_->shape.size()); }
  Index size() const { return impl_->value.size(); }
  Index rows() const;  // ndim()==2 only
  Index cols() const;

  ConstMatrixMap mat() const;  // 2-D view; ndim()==2 only
  MatrixMap mat();
  const Array& array() const { return impl_->value; }
  Array& array() { return impl_->value; }
  double item() const;  // size()==1 only

  bool requires_grad() const { return impl_->requires_grad; }
  bool tracked() const { return impl_->tracked; }
  // Whether gradients flow through this tensor on the active tape.
  bool participates() const { return impl_ && (impl_->requires_grad || impl_->tracked); }

  // Persistent gradient buffer; allocated (zeros) on first access.
  Array& grad();
  // nullptr when no gradient has ever been accumulated.
  const Array* grad_if() const;
  void zero_grad();

  // Value-identical copy detached from any tape.
  Tensor detached_copy() const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Reverse-mode gradient tape. Constructing a Tape makes it the active tape
// for the current thread (tapes nest as a stack); ops record onto the active
// tape. A tape and the tensors recorded on it form a single-threaded unit.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss)=1 and sweeps recorded nodes once, in reverse
  // order. Accumulates into the persistent grad of every requires_grad
  // tensor reached; calling again without zero_grad adds another full pass.
  void backward(const Tensor& loss);

  // Used by op implementations: registers a backward rule. `pull` reads the
  // output adjoint and accumulates into the input adjoints.
  void record(const Tensor& output, std::vector<Tensor> inputs, std::function<void(Tape&)> pull);

  // Adjoint buffer of `t` for the current sweep, zero-initialized on first
  // access within the sweep.
  Array& adjoint(const Tensor& t);
  MatrixMap adjoint_mat(const Tensor& t);
  bool adjoint_fresh(const Tensor& t) const;

 private:
  struct Node {
    Tensor out;
    std::vector<Tensor> ins;
    std::function<void(Tape&)> pull;
  };

  std::vector<Node> nodes_;
  std::uint64_t epoch_ = 0;
  Tape* prev_ = nullptr;
};

}  // namespace dconad
