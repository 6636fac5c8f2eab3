#include "dconad/ops.hpp"

#include <cmath>

namespace dconad {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void check_2d(const char* op, const Tensor& t) {
  if (t.ndim() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got shape " +
                         shape_str(t.shape()));
  }
}

bool want(const Tensor& t) { return t.participates(); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = Tensor::from_flat(a.shape(), a.array() + b.array());
  if (Tape* tp = Tape::active(); tp && (want(a) || want(b))) {
    tp->record(out, {a, b}, [a, b, out](Tape& t) {
      const Array& d = t.adjoint(out);
      if (want(a)) t.adjoint(a) += d;
      if (want(b)) t.adjoint(b) += d;
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = Tensor::from_flat(a.shape(), a.array() - b.array());
  if (Tape* tp = Tape::active(); tp && (want(a) || want(b))) {
    tp->record(out, {a, b}, [a, b, out](Tape& t) {
      const Array& d = t.adjoint(out);
      if (want(a)) t.adjoint(a) += d;
      if (want(b)) t.adjoint(b) -= d;
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = Tensor::from_flat(a.shape(), a.array() * b.array());
  if (Tape* tp = Tape::active(); tp && (want(a) || want(b))) {
    tp->record(out, {a, b}, [a, b, out](Tape& t) {
      const Array& d = t.adjoint(out);
      if (want(a)) t.adjoint(a) += d * b.array();
      if (want(b)) t.adjoint(b) += d * a.array();
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::from_flat(a.shape(), a.array() * c);
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out, c](Tape& t) { t.adjoint(a) += t.adjoint(out) * c; });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d("matmul", a);
  check_2d("matmul", b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  Tensor out({a.rows(), b.cols()});
  out.mat().noalias() = a.mat() * b.mat();
  if (Tape* tp = Tape::active(); tp && (want(a) || want(b))) {
    tp->record(out, {a, b}, [a, b, out](Tape& t) {
      MatrixMap dout = t.adjoint_mat(out);
      if (want(a)) t.adjoint_mat(a).noalias() += dout * b.mat().transpose();
      if (want(b)) t.adjoint_mat(b).noalias() += a.mat().transpose() * dout;
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  check_2d("transpose", a);
  Tensor out({a.cols(), a.rows()});
  out.mat() = a.mat().transpose();
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out](Tape& t) {
      t.adjoint_mat(a) += t.adjoint_mat(out).transpose();
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
  check_2d("add_rowvec", a);
  if (b.ndim() != 1 || b.size() != a.cols()) {
    throw DimensionError("add_rowvec: bias of shape " + shape_str(b.shape()) +
                         " does not fit matrix " + shape_str(a.shape()));
  }
  Tensor out({a.rows(), a.cols()});
  out.mat() = a.mat().rowwise() + Eigen::Map<const Eigen::RowVectorXd>(b.array().data(), b.size());
  if (Tape* tp = Tape::active(); tp && (want(a) || want(b))) {
    tp->record(out, {a, b}, [a, b, out](Tape& t) {
      MatrixMap dout = t.adjoint_mat(out);
      if (want(a)) t.adjoint_mat(a) += dout;
      if (want(b)) {
        Eigen::Map<Eigen::RowVectorXd>(t.adjoint(b).data(), b.size()) += dout.colwise().sum();
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = Tensor::from_flat(a.shape(), a.array().max(0.0));
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out](Tape& t) {
      t.adjoint(a) += t.adjoint(out) * (a.array() > 0.0).cast<double>();
    });
  }
  return out;
}

Tensor leaky_relu(const Tensor& a, double slope) {
  Tensor out = Tensor::from_flat(a.shape(), (a.array() > 0.0).select(a.array(), a.array() * slope));
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out, slope](Tape& t) {
      Array gate = (a.array() > 0.0).select(Array::Ones(a.size()), Array::Constant(a.size(), slope));
      t.adjoint(a) += t.adjoint(out) * gate;
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Array s = 1.0 / (1.0 + (-a.array()).exp());
  Tensor out = Tensor::from_flat(a.shape(), s);
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out](Tape& t) {
      const Array& s = out.array();
      t.adjoint(a) += t.adjoint(out) * s * (1.0 - s);
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  check_2d("softmax_rows", a);
  if (!a.array().isFinite().all()) {
    throw NumericError("softmax_rows: non-finite input");
  }
  Tensor out({a.rows(), a.cols()});
  {
    ConstMatrixMap in = a.mat();
    MatrixMap o = out.mat();
    for (Index i = 0; i < in.rows(); ++i) {
      Eigen::ArrayXd row = in.row(i).array();
      row -= row.maxCoeff();
      row = row.exp();
      o.row(i) = (row / row.sum()).matrix();
    }
  }
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out](Tape& t) {
      MatrixMap dout = t.adjoint_mat(out);
      MatrixMap da = t.adjoint_mat(a);
      ConstMatrixMap s = out.mat();
      for (Index i = 0; i < s.rows(); ++i) {
        const double dot = dout.row(i).dot(s.row(i));
        da.row(i).array() += s.row(i).array() * (dout.row(i).array() - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
  check_2d("layer_norm", a);
  const Index n = a.cols();
  if (gain.ndim() != 1 || gain.size() != n || bias.ndim() != 1 || bias.size() != n) {
    throw DimensionError("layer_norm: gain/bias of shapes " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not fit matrix " + shape_str(a.shape()));
  }
  const Index m = a.rows();
  Tensor out({m, n});
  Matrix xhat(m, n);
  Eigen::VectorXd inv_std(m);
  {
    ConstMatrixMap in = a.mat();
    MatrixMap o = out.mat();
    Eigen::Map<const Eigen::RowVectorXd> g(gain.array().data(), n);
    Eigen::Map<const Eigen::RowVectorXd> b(bias.array().data(), n);
    for (Index i = 0; i < m; ++i) {
      const double mean = in.row(i).mean();
      Eigen::RowVectorXd centered = in.row(i).array() - mean;
      const double var = centered.squaredNorm() / static_cast<double>(n);
      const double inv = 1.0 / std::sqrt(var + consts::kLayerNormEps);
      inv_std[i] = inv;
      xhat.row(i) = centered * inv;
      o.row(i) = (xhat.row(i).array() * g.array() + b.array()).matrix();
    }
  }
  if (Tape* tp = Tape::active(); tp && (want(a) || want(gain) || want(bias))) {
    tp->record(out, {a, gain, bias}, [a, gain, bias, out, xhat, inv_std, m, n](Tape& t) {
      MatrixMap dout = t.adjoint_mat(out);
      Eigen::Map<const Eigen::RowVectorXd> g(gain.array().data(), n);
      if (want(a)) {
        MatrixMap da = t.adjoint_mat(a);
        for (Index i = 0; i < m; ++i) {
          Eigen::RowVectorXd dxhat = dout.row(i).array() * g.array();
          const double mean_dxhat = dxhat.mean();
          const double mean_dxhat_xhat = dxhat.dot(xhat.row(i)) / static_cast<double>(n);
          da.row(i).array() +=
              inv_std[i] * (dxhat.array() - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat);
        }
      }
      if (want(gain)) {
        Eigen::Map<Eigen::RowVectorXd> dg(t.adjoint(gain).data(), n);
        dg += (dout.array() * xhat.array()).colwise().sum().matrix();
      }
      if (want(bias)) {
        Eigen::Map<Eigen::RowVectorXd> db(t.adjoint(bias).data(), n);
        db += dout.colwise().sum();
      }
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check_2d("concat_cols", a);
  check_2d("concat_cols", b);
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out({a.rows(), a.cols() + b.cols()});
  out.mat().leftCols(a.cols()) = a.mat();
  out.mat().rightCols(b.cols()) = b.mat();
  if (Tape* tp = Tape::active(); tp && (want(a) || want(b))) {
    tp->record(out, {a, b}, [a, b, out](Tape& t) {
      MatrixMap dout = t.adjoint_mat(out);
      if (want(a)) t.adjoint_mat(a) += dout.leftCols(a.cols());
      if (want(b)) t.adjoint_mat(b) += dout.rightCols(b.cols());
    });
  }
  return out;
}

Tensor take_rows(const Tensor& a, Index start, Index count) {
  check_2d("take_rows", a);
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError("take_rows: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + shape_str(a.shape()));
  }
  Tensor out({count, a.cols()});
  out.mat() = a.mat().middleRows(start, count);
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out, start, count](Tape& t) {
      t.adjoint_mat(a).middleRows(start, count) += t.adjoint_mat(out);
    });
  }
  return out;
}

Tensor take_cols(const Tensor& a, Index start, Index count) {
  check_2d("take_cols", a);
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("take_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + shape_str(a.shape()));
  }
  Tensor out({a.rows(), count});
  out.mat() = a.mat().middleCols(start, count);
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out, start, count](Tape& t) {
      t.adjoint_mat(a).middleCols(start, count) += t.adjoint_mat(out);
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rowvec(matmul(x, w), b);
}

Tensor pointwise_feedforward(const Tensor& x, const Tensor& w1, const Tensor& b1,
                             const Tensor& w2, const Tensor& b2) {
  return linear(relu(linear(x, w1, b1)), w2, b2);
}

Tensor bilinear(const Tensor& x, const Tensor& y, const Tensor& w, const Tensor& b) {
  check_2d("bilinear", x);
  check_2d("bilinear", y);
  if (x.rows() != y.rows()) {
    throw DimensionError("bilinear: row counts disagree, " + shape_str(x.shape()) + " vs " +
                         shape_str(y.shape()));
  }
  if (w.ndim() != 3) {
    throw DimensionError("bilinear: weight must be 3-D (k,p,q), got " + shape_str(w.shape()));
  }
  const Index m = x.rows(), p = x.cols(), q = y.cols(), k = w.shape()[0];
  if (w.shape()[1] != p || w.shape()[2] != q) {
    throw DimensionError("bilinear: weight " + shape_str(w.shape()) + " does not fit inputs " +
                         shape_str(x.shape()) + ", " + shape_str(y.shape()));
  }
  if (b.ndim() != 1 || b.size() != k) {
    throw DimensionError("bilinear: bias of shape " + shape_str(b.shape()) + " must have length " +
                         std::to_string(k));
  }
  Tensor out({m, k});
  {
    ConstMatrixMap xm = x.mat(), ym = y.mat();
    MatrixMap o = out.mat();
    for (Index j = 0; j < k; ++j) {
      ConstMatrixMap wj(w.array().data() + j * p * q, p, q);
      // row i: x_i' * W_j * y_i
      Matrix xw = xm * wj;  // (m,q)
      o.col(j) = (xw.array() * ym.array()).rowwise().sum().matrix() +
                 Eigen::VectorXd::Constant(m, b.array()[j]);
    }
  }
  if (Tape* tp = Tape::active(); tp && (want(x) || want(y) || want(w) || want(b))) {
    tp->record(out, {x, y, w, b}, [x, y, w, b, out, m, p, q, k](Tape& t) {
      MatrixMap dout = t.adjoint_mat(out);
      ConstMatrixMap xm = x.mat(), ym = y.mat();
      for (Index j = 0; j < k; ++j) {
        ConstMatrixMap wj(w.array().data() + j * p * q, p, q);
        if (want(x)) {
          Matrix wy = ym * wj.transpose();  // (m,p), row i = (W_j y_i)'
          t.adjoint_mat(x).array() += wy.array().colwise() * dout.col(j).array();
        }
        if (want(y)) {
          Matrix xw = xm * wj;  // (m,q), row i = (W_j' x_i)'
          t.adjoint_mat(y).array() += xw.array().colwise() * dout.col(j).array();
        }
        if (want(w)) {
          MatrixMap dwj(t.adjoint(w).data() + j * p * q, p, q);
          dwj.noalias() += xm.transpose() * (ym.array().colwise() * dout.col(j).array()).matrix();
        }
      }
      if (want(b)) {
        Eigen::Map<Eigen::RowVectorXd>(t.adjoint(b).data(), k) += dout.colwise().sum();
      }
    });
  }
  return out;
}

Tensor row_normalize(const Tensor& a) {
  check_2d("row_normalize", a);
  const Index m = a.rows(), n = a.cols();
  Tensor out({m, n});
  Eigen::VectorXd denom(m);
  {
    ConstMatrixMap in = a.mat();
    MatrixMap o = out.mat();
    for (Index i = 0; i < m; ++i) {
      denom[i] = std::max(in.row(i).sum(), consts::kRowSumEps);
      o.row(i) = in.row(i) / denom[i];
    }
  }
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out, denom, m](Tape& t) {
      MatrixMap dout = t.adjoint_mat(out);
      MatrixMap da = t.adjoint_mat(a);
      ConstMatrixMap o = out.mat();
      ConstMatrixMap in = a.mat();
      for (Index i = 0; i < m; ++i) {
        const bool clamped = in.row(i).sum() < consts::kRowSumEps;
        if (clamped) {
          da.row(i) += dout.row(i) / consts::kRowSumEps;
        } else {
          const double dot = dout.row(i).dot(o.row(i));
          da.row(i).array() += (dout.row(i).array() - dot) / denom[i];
        }
      }
    });
  }
  return out;
}

Tensor kl_rows(const Tensor& p, const Tensor& q) {
  check_2d("kl_rows", p);
  check_same_shape("kl_rows", p, q);
  const Index m = p.rows();
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any()) {
    throw DomainError("kl_rows: negative entries");
  }
  {
    ConstMatrixMap pm = p.mat(), qm = q.mat();
    for (Index i = 0; i < m; ++i) {
      if (std::abs(pm.row(i).sum() - 1.0) > 1e-6 || std::abs(qm.row(i).sum() - 1.0) > 1e-6) {
        throw DomainError("kl_rows: row " + std::to_string(i) + " is not a probability vector");
      }
    }
  }
  const double eps = consts::kLogClampEps;
  Array pc = p.array().max(eps);
  Array qc = q.array().max(eps);
  Array log_ratio = pc.log() - qc.log();
  Tensor out = Tensor::scalar((p.array() * log_ratio).sum());
  if (Tape* tp = Tape::active(); tp && (want(p) || want(q))) {
    tp->record(out, {p, q}, [p, q, out, log_ratio, qc, eps](Tape& t) {
      const double d = t.adjoint(out)[0];
      if (want(p)) {
        Array live = (p.array() > eps).cast<double>();
        t.adjoint(p) += d * (log_ratio + live);
      }
      if (want(q)) {
        Array live = (q.array() > eps).cast<double>();
        t.adjoint(q) += d * (-(p.array() / qc) * live);
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = Tensor::scalar(a.array().sum());
  if (Tape* tp = Tape::active(); tp && want(a)) {
    tp->record(out, {a}, [a, out](Tape& t) { t.adjoint(a) += t.adjoint(out)[0]; });
  }
  return out;
}

Tensor stop_gradient(const Tensor& a) { return a.detached_copy(); }

}  // namespace dconad
