// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace uvcom::ad {

using Mat = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a tape.  Cheap to copy; owns nothing.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& val() const;
  int rows() const;
  int cols() const;
};

/// Reverse-mode tape over dense double matrices.
///
/// Nodes are appended in evaluation order; backward() sweeps them in
/// reverse, so the graph is always topologically consistent.  A node only
/// records a backward closure when gradients can actually flow to it,
/// which prunes data-only subgraphs automatically.
class Tape {
 public:
  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  /// Differentiable input backed by external storage (parameters, probes).
  /// The pointee must outlive the tape; its gradient is read back with grad().
  Var leaf(const Mat* data) {
    if (data == nullptr) throw std::invalid_argument("leaf: null data");
    Node n;
    n.external = data;
    n.tracked = true;
    return push(std::move(n));
  }

  /// Non-differentiable value (data, masks, precomputed tables).
  Var constant(Mat value) {
    Node n;
    n.value = std::move(value);
    n.tracked = false;
    return push(std::move(n));
  }

  /// Internal node.  `back` may be empty for untracked results.
  Var make(Mat value, bool tracked, std::function<void()> back) {
    Node n;
    n.value = std::move(value);
    n.tracked = tracked;
    if (tracked) n.back = std::move(back);
    return push(std::move(n));
  }

  const Mat& val(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.external != nullptr ? *n.external : n.value;
  }

  bool tracked(int id) const { return nodes_[static_cast<size_t>(id)].tracked; }

  /// Id the next pushed node will receive; ops capture it so their backward
  /// closure can read the output gradient via grad_of().
  int next_id() const { return static_cast<int>(nodes_.size()); }

  /// Accumulated gradient of a node; only valid inside backward closures,
  /// which run_backward() invokes only after something flowed in.
  const Mat& grad_of(int id) const {
    return nodes_[static_cast<size_t>(id)].grad;
  }

  /// Adds `g` into the gradient slot of `v` (no-op on untracked nodes).
  /// Used both internally and to seed externally computed gradients.
  template <class E>
  void accum(int id, const E& g) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.tracked) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void seed(const Var& v, const Mat& g) { accum(v.id, g); }

  /// Runs every recorded backward closure in reverse order.  Seeds must
  /// already be in place (see backward() for the common single-loss case).
  void run_backward() {
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.grad.size() != 0 && n.back) n.back();
    }
  }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss node and sweeps the tape.
  void backward(const Var& loss) {
    if (val(loss.id).rows() != 1 || val(loss.id).cols() != 1) {
      throw std::invalid_argument("backward: loss must be 1x1");
    }
    seed(loss, Mat::Ones(1, 1));
    run_backward();
  }

  /// Gradient of `v`; zeros if nothing flowed into it.
  Mat grad(const Var& v) const {
    const Node& n = nodes_[static_cast<size_t>(v.id)];
    if (n.grad.size() != 0) return n.grad;
    const Mat& val = n.external != nullptr ? *n.external : n.value;
    return Mat::Zero(val.rows(), val.cols());
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    std::function<void()> back;
    bool tracked = false;
  };

  Var push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

inline const Mat& Var::val() const { return tape->val(id); }
inline int Var::rows() const { return val().rows(); }
inline int Var::cols() const { return val().cols(); }

// ---- elementwise and scalar ops ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var mul(Var a, Var b);
Var divide(Var a, Var b);
Var cmul(Var a, const Mat& c);
Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var abs_val(Var a);
Var emax(Var a, Var b);
Var emin(Var a, Var b);

// ---- linear algebra ----
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add_rowvec(Var m, Var v);
/// Solves M X = B with partial-pivot LU; M square and invertible.
Var solve_lu(Var m, Var b);

// ---- shape ----
Var slice_rows(Var a, int r0, int n);
Var slice_cols(Var a, int c0, int n);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(Var a, std::vector<int> idx);
/// Row i of the result is row i - offset of the input, zero outside range.
Var time_shift(Var a, int offset);

// ---- normalization and softmax ----
Var row_softmax(Var a);
/// Softmax over rows of (a + bias); bias carries -1e9 at masked keys.
Var row_softmax_bias(Var a, const Mat& bias);
Var row_log_softmax(Var a);
Var row_logsumexp(Var a);
/// log-sum-exp over entries with mask != 0; throws if the mask is empty.
Var logsumexp_masked(Var a, const Mat& mask);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var l2_normalize_rows(Var a, double eps = 1e-12);
/// Columns rescaled to sum 1; a column with sum <= tiny becomes uniform
/// (constant, so no gradient flows through it).
Var col_normalize(Var a, double tiny = 1e-30);

// ---- clustering helpers ----
/// D(i,k) = squared euclidean distance between row i of f and row k of m.
Var pairwise_sqdist(Var f, Var m);
/// Responsibility-weighted centroid update: row k of the result is
/// (Z^T f)_k / sum_i Z(i,k); columns with sum <= tiny keep mu_prev's row.
Var em_mstep(Var f, Var z, Var mu_prev, double tiny = 1e-12);

// ---- reductions ----
Var sum_all(Var a);
Var mean_all(Var a);
/// Columnwise mean over rows; result is 1 x C.
Var mean_rows(Var a);
/// sum(a .* w) as a 1x1 node; w is constant.
Var dot_const(Var a, const Mat& w);

}  // namespace uvcom::ad
