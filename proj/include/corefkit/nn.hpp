#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace coref::nn {

using Mat = Eigen::MatrixXd;

// Reverse-mode autodiff over a flat tape of matrix nodes. Values are doubles
// throughout; graphs are rebuilt per example (define-by-run), so closures
// only capture node indices, never references into the node vector.
class Tape {
 public:
  int push(Mat value) {
    nodes_.push_back({std::move(value), Mat(), nullptr});
    Node& n = nodes_.back();
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_backward(int id, std::function<void()> back) {
    nodes_[id].back = std::move(back);
  }

  Mat& value(int id) { return nodes_[id].value; }
  Mat& grad(int id) { return nodes_[id].grad; }

  // Seeds d(root)/d(root) = 1 and propagates to every earlier node. root
  // must hold a 1x1 value (a scalar loss).
  void backward(int root);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;
};

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const { return tape->value(id); }
  const Mat& grad() const { return tape->grad(id); }
  long rows() const { return value().rows(); }
  long cols() const { return value().cols(); }
};

Var leaf(Tape& tape, Mat value);

Var add(Var a, Var b);              // same shape
Var add_rowvec(Var a, Var row);     // row broadcast over a's rows
Var scale(Var a, double c);
Var matmul(Var a, Var b);           // a * b
Var matmul_nt(Var a, Var b);        // a * b^T
Var hadamard(Var a, Var b);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
// Index -1 yields a zero row and receives no gradient.
Var gather_rows(Var a, std::vector<int> idx);
Var gather_elems(Var a, std::vector<std::pair<int, int>> ij);  // n x 1
Var repeat_rows(Var row, int n);
Var vtanh(Var a);
Var vsigmoid(Var a);
Var sum_all(Var a);  // 1 x 1

// Windowed self-attention with relative positions. q, k, v are T x d;
// relpos is a constant window x d table indexed by (s - t + window/2) for
// key position s and query position t. Token t attends to positions
// [t - window/2, t + window/2 - 1] clipped to the sequence; logits are
// q_t . (k_s + relpos_r) / sqrt(d).
Var local_attention(Var q, Var k, Var v, const Mat& relpos, int window);

// Per-span softmax attention over token scores: for each (start, end) span,
// output row = sum_j softmax(scores[start..end])_j * x_j.
Var span_attention(Var x, Var scores, std::vector<std::pair<int, int>> spans);

// Negative marginal log-likelihood of one span's antecedent options. scores
// holds the explicit options (n x 1); a dummy option with fixed score 0 is
// always included. gold_rows are indices into scores; eps_gold marks the
// dummy option as gold. The gold set must be non-empty.
Var marginal_nll(Var scores, std::vector<int> gold_rows, bool eps_gold);

// Sum over rows of -[y log sigma(x) + (1-y) log(1-sigma(x))], stable form.
Var bce_with_logits(Var logits, std::vector<double> targets);

double softplus(double x);

}  // namespace coref::nn
