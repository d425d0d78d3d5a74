// SPDX-License-Identifier: Apache-2.0
#include "uvcom/autodiff.hpp"

#include <cmath>
#include <string>

namespace uvcom::ad {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

void check_finite(const Mat& m, const char* op) {
  if (!m.allFinite()) {
    throw std::domain_error(std::string(op) + ": non-finite input");
  }
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Row softmax of (a + bias) with max subtraction; bias may be null.
Mat softmax_rows_value(const Mat& a, const Mat* bias) {
  Mat logits = bias != nullptr ? Mat(a + *bias) : a;
  Mat out(a.rows(), a.cols());
  for (int i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id) || t.tracked(b.id);
  const int out = t.next_id();
  return t.make(a.val() + b.val(), tr,
                [&t, ai = a.id, bi = b.id, out]() {
                  const Mat& g = t.grad_of(out);
                  t.accum(ai, g);
                  t.accum(bi, g);
                });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id) || t.tracked(b.id);
  const int out = t.next_id();
  return t.make(a.val() - b.val(), tr,
                [&t, ai = a.id, bi = b.id, out]() {
                  const Mat& g = t.grad_of(out);
                  t.accum(ai, g);
                  t.accum(bi, -g);
                });
}

Var neg(Var a) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make(-a.val(), tr, [&t, ai = a.id, out]() {
    t.accum(ai, -t.grad_of(out));
  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make(a.val() * c, tr, [&t, ai = a.id, c, out]() {
    t.accum(ai, t.grad_of(out) * c);
  });
}

Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make((a.val().array() + c).matrix(), tr, [&t, ai = a.id, out]() {
    t.accum(ai, t.grad_of(out));
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id) || t.tracked(b.id);
  const int out = t.next_id();
  return t.make(a.val().cwiseProduct(b.val()), tr,
                [&t, ai = a.id, bi = b.id, out]() {
                  const Mat& g = t.grad_of(out);
                  t.accum(ai, g.cwiseProduct(t.val(bi)));
                  t.accum(bi, g.cwiseProduct(t.val(ai)));
                });
}

Var divide(Var a, Var b) {
  check_same_shape(a, b, "divide");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id) || t.tracked(b.id);
  const int out = t.next_id();
  return t.make(a.val().cwiseQuotient(b.val()), tr,
                [&t, ai = a.id, bi = b.id, out]() {
                  const Mat& g = t.grad_of(out);
                  const Mat& bv = t.val(bi);
                  Mat ga = g.cwiseQuotient(bv);
                  t.accum(ai, ga);
                  t.accum(bi, -ga.cwiseProduct(t.val(ai)).cwiseQuotient(bv));
                });
}

Var cmul(Var a, const Mat& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw std::invalid_argument("cmul: shape mismatch");
  }
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make(a.val().cwiseProduct(c), tr, [&t, ai = a.id, c, out]() {
    t.accum(ai, t.grad_of(out).cwiseProduct(c));
  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make(a.val().cwiseMax(0.0), tr, [&t, ai = a.id, out]() {
    Mat mask = (t.val(ai).array() > 0.0).cast<double>().matrix();
    t.accum(ai, t.grad_of(out).cwiseProduct(mask));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  Mat y = a.val().unaryExpr([](double x) { return sigmoid_scalar(x); });
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, out]() {
    const Mat& yv = t.val(out);
    Mat d = yv.cwiseProduct(Mat::Ones(yv.rows(), yv.cols()) - yv);
    t.accum(ai, t.grad_of(out).cwiseProduct(d));
  });
}

Var softplus(Var a) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  Mat y = a.val().unaryExpr([](double x) { return stable_softplus(x); });
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, out]() {
    Mat d = t.val(ai).unaryExpr([](double x) { return sigmoid_scalar(x); });
    t.accum(ai, t.grad_of(out).cwiseProduct(d));
  });
}

Var abs_val(Var a) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make(a.val().cwiseAbs(), tr, [&t, ai = a.id, out]() {
    Mat s = t.val(ai).unaryExpr(
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    t.accum(ai, t.grad_of(out).cwiseProduct(s));
  });
}

Var emax(Var a, Var b) {
  check_same_shape(a, b, "emax");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id) || t.tracked(b.id);
  const int out = t.next_id();
  return t.make(a.val().cwiseMax(b.val()), tr,
                [&t, ai = a.id, bi = b.id, out]() {
                  const Mat& g = t.grad_of(out);
                  // Ties route the subgradient to the first argument.
                  Mat ma = (t.val(ai).array() >= t.val(bi).array())
                               .cast<double>()
                               .matrix();
                  t.accum(ai, g.cwiseProduct(ma));
                  t.accum(bi, g.cwiseProduct(Mat::Ones(g.rows(), g.cols()) - ma));
                });
}

Var emin(Var a, Var b) {
  check_same_shape(a, b, "emin");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id) || t.tracked(b.id);
  const int out = t.next_id();
  return t.make(a.val().cwiseMin(b.val()), tr,
                [&t, ai = a.id, bi = b.id, out]() {
                  const Mat& g = t.grad_of(out);
                  Mat ma = (t.val(ai).array() <= t.val(bi).array())
                               .cast<double>()
                               .matrix();
                  t.accum(ai, g.cwiseProduct(ma));
                  t.accum(bi, g.cwiseProduct(Mat::Ones(g.rows(), g.cols()) - ma));
                });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch");
  }
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id) || t.tracked(b.id);
  const int out = t.next_id();
  return t.make(a.val() * b.val(), tr,
                [&t, ai = a.id, bi = b.id, out]() {
                  const Mat& g = t.grad_of(out);
                  t.accum(ai, g * t.val(bi).transpose());
                  t.accum(bi, t.val(ai).transpose() * g);
                });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make(a.val().transpose(), tr, [&t, ai = a.id, out]() {
    t.accum(ai, t.grad_of(out).transpose());
  });
}

Var add_rowvec(Var m, Var v) {
  if (v.rows() != 1 || v.cols() != m.cols()) {
    throw std::invalid_argument("add_rowvec: v must be 1 x cols(m)");
  }
  Tape& t = *m.tape;
  const bool tr = t.tracked(m.id) || t.tracked(v.id);
  Mat y = m.val();
  y.rowwise() += Eigen::RowVectorXd(v.val().row(0));
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, mi = m.id, vi = v.id, out]() {
    const Mat& g = t.grad_of(out);
    t.accum(mi, g);
    t.accum(vi, Mat(g.colwise().sum()));
  });
}

Var solve_lu(Var m, Var b) {
  if (m.rows() != m.cols() || m.rows() != b.rows()) {
    throw std::invalid_argument("solve_lu: M must be square, rows(M)==rows(B)");
  }
  check_finite(m.val(), "solve_lu");
  Tape& t = *m.tape;
  const bool tr = t.tracked(m.id) || t.tracked(b.id);
  Eigen::PartialPivLU<Mat> lu(m.val());
  Mat x = lu.solve(b.val());
  if (!x.allFinite()) throw std::domain_error("solve_lu: singular system");
  const int out = t.next_id();
  return t.make(std::move(x), tr, [&t, mi = m.id, bi = b.id, out]() {
    const Mat& g = t.grad_of(out);
    // gB = M^-T g; gM = -gB X^T.  Sizes here are small, so refactorizing
    // the transpose in backward is cheaper than persisting the LU.
    Eigen::PartialPivLU<Mat> lu_t(t.val(mi).transpose());
    Mat gb = lu_t.solve(g);
    t.accum(mi, Mat(-gb * t.val(out).transpose()));
    t.accum(bi, gb);
  });
}

Var slice_rows(Var a, int r0, int n) {
  if (r0 < 0 || n < 0 || r0 + n > a.rows()) {
    throw std::out_of_range("slice_rows: range out of bounds");
  }
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make(a.val().middleRows(r0, n), tr,
                [&t, ai = a.id, r0, n, out]() {
                  const Mat& src = t.val(ai);
                  Mat g = Mat::Zero(src.rows(), src.cols());
                  g.middleRows(r0, n) = t.grad_of(out);
                  t.accum(ai, g);
                });
}

Var slice_cols(Var a, int c0, int n) {
  if (c0 < 0 || n < 0 || c0 + n > a.cols()) {
    throw std::out_of_range("slice_cols: range out of bounds");
  }
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int out = t.next_id();
  return t.make(a.val().middleCols(c0, n), tr,
                [&t, ai = a.id, c0, n, out]() {
                  const Mat& src = t.val(ai);
                  Mat g = Mat::Zero(src.rows(), src.cols());
                  g.middleCols(c0, n) = t.grad_of(out);
                  t.accum(ai, g);
                });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  Tape& t = *parts[0].tape;
  int total = 0;
  bool tr = false;
  for (const Var& p : parts) {
    if (p.cols() != parts[0].cols()) {
      throw std::invalid_argument("concat_rows: column mismatch");
    }
    total += p.rows();
    tr = tr || t.tracked(p.id);
  }
  Mat y(total, parts[0].cols());
  std::vector<int> ids;
  std::vector<int> offs;
  std::vector<int> lens;
  int off = 0;
  for (const Var& p : parts) {
    y.middleRows(off, p.rows()) = p.val();
    ids.push_back(p.id);
    offs.push_back(off);
    lens.push_back(p.rows());
    off += p.rows();
  }
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ids, offs, lens, out]() {
    const Mat& g = t.grad_of(out);
    for (size_t k = 0; k < ids.size(); ++k) {
      t.accum(ids[k], g.middleRows(offs[k], lens[k]));
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  Tape& t = *parts[0].tape;
  int total = 0;
  bool tr = false;
  for (const Var& p : parts) {
    if (p.rows() != parts[0].rows()) {
      throw std::invalid_argument("concat_cols: row mismatch");
    }
    total += p.cols();
    tr = tr || t.tracked(p.id);
  }
  Mat y(parts[0].rows(), total);
  std::vector<int> ids;
  std::vector<int> offs;
  std::vector<int> lens;
  int off = 0;
  for (const Var& p : parts) {
    y.middleCols(off, p.cols()) = p.val();
    ids.push_back(p.id);
    offs.push_back(off);
    lens.push_back(p.cols());
    off += p.cols();
  }
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ids, offs, lens, out]() {
    const Mat& g = t.grad_of(out);
    for (size_t k = 0; k < ids.size(); ++k) {
      t.accum(ids[k], g.middleCols(offs[k], lens[k]));
    }
  });
}

Var gather_rows(Var a, std::vector<int> idx) {
  Tape& t = *a.tape;
  for (int i : idx) {
    if (i < 0 || i >= a.rows()) {
      throw std::out_of_range("gather_rows: index out of bounds");
    }
  }
  const bool tr = t.tracked(a.id);
  Mat y(static_cast<int>(idx.size()), a.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    y.row(static_cast<int>(k)) = a.val().row(idx[k]);
  }
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, idx, out]() {
    const Mat& g = t.grad_of(out);
    const Mat& src = t.val(ai);
    Mat ga = Mat::Zero(src.rows(), src.cols());
    for (size_t k = 0; k < idx.size(); ++k) {
      ga.row(idx[k]) += g.row(static_cast<int>(k));
    }
    t.accum(ai, ga);
  });
}

Var time_shift(Var a, int offset) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int rows = a.rows();
  Mat y = Mat::Zero(rows, a.cols());
  for (int i = 0; i < rows; ++i) {
    const int j = i - offset;
    if (j >= 0 && j < rows) y.row(i) = a.val().row(j);
  }
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, offset, rows, out]() {
    const Mat& g = t.grad_of(out);
    Mat ga = Mat::Zero(rows, g.cols());
    for (int i = 0; i < rows; ++i) {
      const int j = i - offset;
      if (j >= 0 && j < rows) ga.row(j) += g.row(i);
    }
    t.accum(ai, ga);
  });
}

namespace {

Var softmax_common(Var a, const Mat* bias) {
  check_finite(a.val(), "row_softmax");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  Mat y = softmax_rows_value(a.val(), bias);
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, out]() {
    const Mat& g = t.grad_of(out);
    const Mat& y = t.val(out);
    Mat gy = g.cwiseProduct(y);
    Eigen::VectorXd rs = gy.rowwise().sum();
    t.accum(ai, Mat(gy - y.cwiseProduct(rs.replicate(1, y.cols()))));
  });
}

}  // namespace

Var row_softmax(Var a) { return softmax_common(a, nullptr); }

Var row_softmax_bias(Var a, const Mat& bias) {
  if (bias.rows() != a.rows() || bias.cols() != a.cols()) {
    throw std::invalid_argument("row_softmax_bias: bias shape mismatch");
  }
  return softmax_common(a, &bias);
}

Var row_log_softmax(Var a) {
  check_finite(a.val(), "row_log_softmax");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  Mat y(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double m = a.val().row(i).maxCoeff();
    const double lse =
        m + std::log((a.val().row(i).array() - m).exp().sum());
    y.row(i) = (a.val().row(i).array() - lse).matrix();
  }
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, out]() {
    const Mat& g = t.grad_of(out);
    Mat p = t.val(out).array().exp().matrix();
    Eigen::VectorXd rs = g.rowwise().sum();
    t.accum(ai, Mat(g - p.cwiseProduct(rs.replicate(1, p.cols()))));
  });
}

Var row_logsumexp(Var a) {
  check_finite(a.val(), "row_logsumexp");
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  Mat y(a.rows(), 1);
  for (int i = 0; i < a.rows(); ++i) {
    const double m = a.val().row(i).maxCoeff();
    y(i, 0) = m + std::log((a.val().row(i).array() - m).exp().sum());
  }
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, out]() {
    const Mat& g = t.grad_of(out);
    const Mat& x = t.val(ai);
    const Mat& y = t.val(out);
    Mat p = (x - y.replicate(1, x.cols())).array().exp().matrix();
    t.accum(ai, Mat(p.cwiseProduct(g.replicate(1, x.cols()))));
  });
}

Var logsumexp_masked(Var a, const Mat& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw std::invalid_argument("logsumexp_masked: mask shape mismatch");
  }
  check_finite(a.val(), "logsumexp_masked");
  double m = -std::numeric_limits<double>::infinity();
  int selected = 0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      if (mask(i, j) != 0.0) {
        m = std::max(m, a.val()(i, j));
        ++selected;
      }
    }
  }
  if (selected == 0) {
    throw std::invalid_argument("logsumexp_masked: empty mask");
  }
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      if (mask(i, j) != 0.0) s += std::exp(a.val()(i, j) - m);
    }
  }
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  Mat y(1, 1);
  y(0, 0) = m + std::log(s);
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, mask, out]() {
    const double g = t.grad_of(out)(0, 0);
    const Mat& x = t.val(ai);
    const double lse = t.val(out)(0, 0);
    Mat ga = Mat::Zero(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) {
        if (mask(i, j) != 0.0) ga(i, j) = g * std::exp(x(i, j) - lse);
      }
    }
    t.accum(ai, ga);
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 ||
      beta.cols() != x.cols()) {
    throw std::invalid_argument("layer_norm: gamma/beta must be 1 x cols(x)");
  }
  Tape& t = *x.tape;
  const bool tr =
      t.tracked(x.id) || t.tracked(gamma.id) || t.tracked(beta.id);
  const int rows = x.rows();
  const int cols = x.cols();
  Mat xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (int i = 0; i < rows; ++i) {
    const double mu = x.val().row(i).mean();
    const double var = (x.val().row(i).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    xhat.row(i) = ((x.val().row(i).array() - mu) * is).matrix();
  }
  Mat y = xhat;
  for (int i = 0; i < rows; ++i) {
    y.row(i) = y.row(i).cwiseProduct(gamma.val().row(0)) + beta.val().row(0);
  }
  const int out = t.next_id();
  return t.make(
      std::move(y), tr,
      [&t, xi = x.id, gi = gamma.id, bi = beta.id, xhat, inv_std, out]() {
        const Mat& g = t.grad_of(out);
        const Mat& gam = t.val(gi);
        const int rows = g.rows();
        const int cols = g.cols();
        Mat gx(rows, cols);
        Mat ggam = Mat::Zero(1, cols);
        Mat gbeta = Mat::Zero(1, cols);
        for (int i = 0; i < rows; ++i) {
          Eigen::RowVectorXd h = g.row(i).cwiseProduct(gam.row(0));
          const double mh = h.mean();
          const double mhx = h.cwiseProduct(xhat.row(i)).mean();
          gx.row(i) =
              ((h.array() - mh - xhat.row(i).array() * mhx) * inv_std(i))
                  .matrix();
          ggam.row(0) += g.row(i).cwiseProduct(xhat.row(i));
          gbeta.row(0) += g.row(i);
        }
        t.accum(xi, gx);
        t.accum(gi, ggam);
        t.accum(bi, gbeta);
      });
}

Var l2_normalize_rows(Var a, double eps) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int rows = a.rows();
  Mat y(rows, a.cols());
  Eigen::VectorXd inv_r(rows);
  for (int i = 0; i < rows; ++i) {
    const double r = std::sqrt(a.val().row(i).squaredNorm() + eps * eps);
    inv_r(i) = 1.0 / r;
    y.row(i) = a.val().row(i) * inv_r(i);
  }
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, inv_r, out]() {
    const Mat& g = t.grad_of(out);
    const Mat& x = t.val(ai);
    Mat ga(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
      const double ir = inv_r(i);
      const double gx = g.row(i).dot(x.row(i));
      ga.row(i) = g.row(i) * ir - x.row(i) * (gx * ir * ir * ir);
    }
    t.accum(ai, ga);
  });
}

Var col_normalize(Var a, double tiny) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const int rows = a.rows();
  const int cols = a.cols();
  Eigen::RowVectorXd sums = a.val().colwise().sum();
  Mat y(rows, cols);
  std::vector<bool> live(static_cast<size_t>(cols));
  for (int k = 0; k < cols; ++k) {
    if (sums(k) > tiny) {
      live[static_cast<size_t>(k)] = true;
      y.col(k) = a.val().col(k) / sums(k);
    } else {
      live[static_cast<size_t>(k)] = false;
      y.col(k).setConstant(1.0 / rows);
    }
  }
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, sums, live, out]() {
    const Mat& g = t.grad_of(out);
    const Mat& yv = t.val(out);
    Mat ga = Mat::Zero(g.rows(), g.cols());
    for (int k = 0; k < g.cols(); ++k) {
      if (!live[static_cast<size_t>(k)]) continue;
      const double gy = g.col(k).dot(yv.col(k));
      ga.col(k) = ((g.col(k).array() - gy) / sums(k)).matrix();
    }
    t.accum(ai, ga);
  });
}

Var pairwise_sqdist(Var f, Var m) {
  if (f.cols() != m.cols()) {
    throw std::invalid_argument("pairwise_sqdist: feature dim mismatch");
  }
  check_finite(f.val(), "pairwise_sqdist");
  check_finite(m.val(), "pairwise_sqdist");
  Tape& t = *f.tape;
  const bool tr = t.tracked(f.id) || t.tracked(m.id);
  const int rows = f.rows();
  const int cents = m.rows();
  Mat d(rows, cents);
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cents; ++k) {
      d(i, k) = (f.val().row(i) - m.val().row(k)).squaredNorm();
    }
  }
  const int out = t.next_id();
  return t.make(std::move(d), tr, [&t, fi = f.id, mi = m.id, out]() {
    const Mat& g = t.grad_of(out);
    const Mat& fv = t.val(fi);
    const Mat& mv = t.val(mi);
    Eigen::VectorXd rs = g.rowwise().sum();
    Eigen::VectorXd cs = g.colwise().sum();
    t.accum(fi, Mat(2.0 * (rs.asDiagonal() * fv - g * mv)));
    t.accum(mi, Mat(2.0 * (cs.asDiagonal() * mv - g.transpose() * fv)));
  });
}

Var em_mstep(Var f, Var z, Var mu_prev, double tiny) {
  if (z.rows() != f.rows() || mu_prev.rows() != z.cols() ||
      mu_prev.cols() != f.cols()) {
    throw std::invalid_argument("em_mstep: shape mismatch");
  }
  Tape& t = *f.tape;
  const bool tr =
      t.tracked(f.id) || t.tracked(z.id) || t.tracked(mu_prev.id);
  const int cents = z.cols();
  Eigen::RowVectorXd sums = z.val().colwise().sum();
  Mat weighted = z.val().transpose() * f.val();
  Mat mu(cents, f.cols());
  std::vector<bool> live(static_cast<size_t>(cents));
  for (int k = 0; k < cents; ++k) {
    if (sums(k) > tiny) {
      live[static_cast<size_t>(k)] = true;
      mu.row(k) = weighted.row(k) / sums(k);
    } else {
      live[static_cast<size_t>(k)] = false;
      mu.row(k) = mu_prev.val().row(k);
    }
  }
  const int out = t.next_id();
  return t.make(
      std::move(mu), tr,
      [&t, fi = f.id, zi = z.id, pi = mu_prev.id, sums, live, out]() {
        const Mat& g = t.grad_of(out);
        const Mat& fv = t.val(fi);
        const Mat& zv = t.val(zi);
        const Mat& muv = t.val(out);
        Mat zscaled = Mat::Zero(zv.rows(), zv.cols());
        Mat gp = Mat::Zero(g.rows(), g.cols());
        Mat gz = Mat::Zero(zv.rows(), zv.cols());
        for (int k = 0; k < zv.cols(); ++k) {
          if (live[static_cast<size_t>(k)]) {
            zscaled.col(k) = zv.col(k) / sums(k);
            // d mu_k / d z(i,k) = (f_i - mu_k) / s_k
            const double tk = g.row(k).dot(muv.row(k));
            Eigen::VectorXd fg = fv * g.row(k).transpose();
            gz.col(k) = ((fg.array() - tk) / sums(k)).matrix();
          } else {
            gp.row(k) = g.row(k);
          }
        }
        t.accum(fi, Mat(zscaled * g));
        t.accum(zi, gz);
        t.accum(pi, gp);
      });
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  Mat y(1, 1);
  y(0, 0) = a.val().sum();
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, out]() {
    const double g = t.grad_of(out)(0, 0);
    const Mat& x = t.val(ai);
    t.accum(ai, Mat(Mat::Constant(x.rows(), x.cols(), g)));
  });
}

Var mean_all(Var a) {
  return scale(sum_all(a), 1.0 / (static_cast<double>(a.rows()) * a.cols()));
}

Var mean_rows(Var a) {
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  const double inv = 1.0 / a.rows();
  Mat y = a.val().colwise().mean();
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, inv, out]() {
    const Mat& g = t.grad_of(out);
    const Mat& x = t.val(ai);
    t.accum(ai, Mat(g.replicate(x.rows(), 1) * inv));
  });
}

Var dot_const(Var a, const Mat& w) {
  if (w.rows() != a.rows() || w.cols() != a.cols()) {
    throw std::invalid_argument("dot_const: shape mismatch");
  }
  Tape& t = *a.tape;
  const bool tr = t.tracked(a.id);
  Mat y(1, 1);
  y(0, 0) = a.val().cwiseProduct(w).sum();
  const int out = t.next_id();
  return t.make(std::move(y), tr, [&t, ai = a.id, w, out]() {
    t.accum(ai, Mat(w * t.grad_of(out)(0, 0)));
  });
}

}  // namespace uvcom::ad
