#include "corefkit/nn.hpp"

#include <cassert>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace coref::nn {

void Tape::backward(int root) {
  Mat& seed = nodes_[root].grad;
  if (seed.rows() != 1 || seed.cols() != 1)
    throw std::logic_error("backward root must be a scalar");
  seed(0, 0) = 1.0;
  for (int i = root; i >= 0; i--)
    if (nodes_[i].back) nodes_[i].back();
}

Var leaf(Tape& tape, Mat value) { return {&tape, tape.push(std::move(value))}; }

Var add(Var a, Var b) {
  Tape* t = a.tape;
  int id = t->push(a.value() + b.value());
  t->set_backward(id, [t, id, ai = a.id, bi = b.id] {
    t->grad(ai) += t->grad(id);
    t->grad(bi) += t->grad(id);
  });
  return {t, id};
}

Var add_rowvec(Var a, Var row) {
  Tape* t = a.tape;
  Mat v = a.value();
  v.rowwise() += Eigen::RowVectorXd(row.value().row(0));
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, ai = a.id, ri = row.id] {
    t->grad(ai) += t->grad(id);
    t->grad(ri).row(0) += t->grad(id).colwise().sum();
  });
  return {t, id};
}

Var scale(Var a, double c) {
  Tape* t = a.tape;
  int id = t->push(a.value() * c);
  t->set_backward(id, [t, id, ai = a.id, c] { t->grad(ai) += c * t->grad(id); });
  return {t, id};
}

Var matmul(Var a, Var b) {
  Tape* t = a.tape;
  int id = t->push(a.value() * b.value());
  t->set_backward(id, [t, id, ai = a.id, bi = b.id] {
    t->grad(ai) += t->grad(id) * t->value(bi).transpose();
    t->grad(bi) += t->value(ai).transpose() * t->grad(id);
  });
  return {t, id};
}

Var matmul_nt(Var a, Var b) {
  Tape* t = a.tape;
  int id = t->push(a.value() * b.value().transpose());
  t->set_backward(id, [t, id, ai = a.id, bi = b.id] {
    t->grad(ai) += t->grad(id) * t->value(bi);
    t->grad(bi) += t->grad(id).transpose() * t->value(ai);
  });
  return {t, id};
}

Var hadamard(Var a, Var b) {
  Tape* t = a.tape;
  int id = t->push(a.value().cwiseProduct(b.value()));
  t->set_backward(id, [t, id, ai = a.id, bi = b.id] {
    t->grad(ai) += t->grad(id).cwiseProduct(t->value(bi));
    t->grad(bi) += t->grad(id).cwiseProduct(t->value(ai));
  });
  return {t, id};
}

Var concat_cols(const std::vector<Var>& parts) {
  Tape* t = parts.front().tape;
  long rows = parts.front().rows(), cols = 0;
  for (const Var& p : parts) cols += p.cols();
  Mat v(rows, cols);
  long at = 0;
  std::vector<int> ids;
  std::vector<long> widths;
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    ids.push_back(p.id);
    widths.push_back(p.cols());
    at += p.cols();
  }
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, ids, widths] {
    long at = 0;
    for (size_t k = 0; k < ids.size(); k++) {
      t->grad(ids[k]) += t->grad(id).middleCols(at, widths[k]);
      at += widths[k];
    }
  });
  return {t, id};
}

Var concat_rows(const std::vector<Var>& parts) {
  Tape* t = parts.front().tape;
  long cols = parts.front().cols(), rows = 0;
  for (const Var& p : parts) rows += p.rows();
  Mat v(rows, cols);
  long at = 0;
  std::vector<int> ids;
  std::vector<long> heights;
  for (const Var& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    ids.push_back(p.id);
    heights.push_back(p.rows());
    at += p.rows();
  }
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, ids, heights] {
    long at = 0;
    for (size_t k = 0; k < ids.size(); k++) {
      t->grad(ids[k]) += t->grad(id).middleRows(at, heights[k]);
      at += heights[k];
    }
  });
  return {t, id};
}

Var gather_rows(Var a, std::vector<int> idx) {
  Tape* t = a.tape;
  Mat v = Mat::Zero(static_cast<long>(idx.size()), a.cols());
  for (size_t r = 0; r < idx.size(); r++)
    if (idx[r] >= 0) v.row(r) = a.value().row(idx[r]);
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, ai = a.id, idx = std::move(idx)] {
    for (size_t r = 0; r < idx.size(); r++)
      if (idx[r] >= 0) t->grad(ai).row(idx[r]) += t->grad(id).row(r);
  });
  return {t, id};
}

Var gather_elems(Var a, std::vector<std::pair<int, int>> ij) {
  Tape* t = a.tape;
  Mat v(static_cast<long>(ij.size()), 1);
  for (size_t r = 0; r < ij.size(); r++)
    v(r, 0) = a.value()(ij[r].first, ij[r].second);
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, ai = a.id, ij = std::move(ij)] {
    for (size_t r = 0; r < ij.size(); r++)
      t->grad(ai)(ij[r].first, ij[r].second) += t->grad(id)(r, 0);
  });
  return {t, id};
}

Var repeat_rows(Var row, int n) {
  Tape* t = row.tape;
  Mat v = row.value().row(0).replicate(n, 1);
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, ri = row.id] {
    t->grad(ri).row(0) += t->grad(id).colwise().sum();
  });
  return {t, id};
}

Var vtanh(Var a) {
  Tape* t = a.tape;
  int id = t->push(a.value().array().tanh().matrix());
  t->set_backward(id, [t, id, ai = a.id] {
    const Mat& y = t->value(id);
    t->grad(ai) += t->grad(id).cwiseProduct(
        (1.0 - y.array().square()).matrix());
  });
  return {t, id};
}

Var vsigmoid(Var a) {
  Tape* t = a.tape;
  // sigma(x) = (1 + tanh(x/2)) / 2 avoids exp overflow on both sides.
  int id = t->push((0.5 * (1.0 + (a.value() * 0.5).array().tanh())).matrix());
  t->set_backward(id, [t, id, ai = a.id] {
    const Mat& y = t->value(id);
    t->grad(ai) += t->grad(id).cwiseProduct(
        (y.array() * (1.0 - y.array())).matrix());
  });
  return {t, id};
}

Var sum_all(Var a) {
  Tape* t = a.tape;
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, ai = a.id] {
    t->grad(ai).array() += t->grad(id)(0, 0);
  });
  return {t, id};
}

Var local_attention(Var q, Var k, Var v, const Mat& relpos, int window) {
  Tape* t = q.tape;
  const long T = q.rows(), d = q.cols();
  if (relpos.rows() != window || relpos.cols() != d)
    throw std::logic_error("relpos table shape mismatch");
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  const int left = window / 2;
  auto alpha = std::make_shared<Mat>(Mat::Zero(T, window));

  Mat out = Mat::Zero(T, d);
  const Mat& Q = q.value();
  const Mat& K = k.value();
  const Mat& V = v.value();
  for (long tp = 0; tp < T; tp++) {
    long lo = std::max<long>(0, tp - left);
    long hi = std::min<long>(T - 1, tp - left + window - 1);
    double max_logit = -1e300;
    Eigen::VectorXd logits(hi - lo + 1);
    for (long s = lo; s <= hi; s++) {
      long r = s - tp + left;
      logits(s - lo) = Q.row(tp).dot(K.row(s) + relpos.row(r)) * inv;
      max_logit = std::max(max_logit, logits(s - lo));
    }
    double z = 0.0;
    for (long s = lo; s <= hi; s++) z += std::exp(logits(s - lo) - max_logit);
    for (long s = lo; s <= hi; s++) {
      double a = std::exp(logits(s - lo) - max_logit) / z;
      (*alpha)(tp, s - tp + left) = a;
      out.row(tp) += a * V.row(s);
    }
  }

  int id = t->push(std::move(out));
  Mat relpos_copy = relpos;
  t->set_backward(id, [t, id, qi = q.id, ki = k.id, vi = v.id, alpha,
                       relpos = std::move(relpos_copy), window, left, inv] {
    const Mat& Q = t->value(qi);
    const Mat& K = t->value(ki);
    const Mat& V = t->value(vi);
    const Mat& dy = t->grad(id);
    const long T = Q.rows();
    for (long tp = 0; tp < T; tp++) {
      long lo = std::max<long>(0, tp - left);
      long hi = std::min<long>(T - 1, tp - left + window - 1);
      // d(alpha_s) = dy_t . v_s, then softmax backward to logits.
      double dot_sum = 0.0;
      Eigen::VectorXd da(hi - lo + 1);
      for (long s = lo; s <= hi; s++) {
        da(s - lo) = dy.row(tp).dot(V.row(s));
        dot_sum += (*alpha)(tp, s - tp + left) * da(s - lo);
      }
      for (long s = lo; s <= hi; s++) {
        long r = s - tp + left;
        double a = (*alpha)(tp, r);
        double dlogit = a * (da(s - lo) - dot_sum);
        t->grad(vi).row(s) += a * dy.row(tp);
        t->grad(qi).row(tp) += dlogit * (K.row(s) + relpos.row(r)) * inv;
        t->grad(ki).row(s) += dlogit * Q.row(tp) * inv;
      }
    }
  });
  return {t, id};
}

Var span_attention(Var x, Var scores, std::vector<std::pair<int, int>> spans) {
  Tape* t = x.tape;
  const long d = x.cols();
  auto alphas = std::make_shared<std::vector<Eigen::VectorXd>>();
  alphas->reserve(spans.size());

  Mat out(static_cast<long>(spans.size()), d);
  const Mat& X = x.value();
  const Mat& S = scores.value();
  for (size_t i = 0; i < spans.size(); i++) {
    auto [s, e] = spans[i];
    double mx = -1e300;
    for (int j = s; j <= e; j++) mx = std::max(mx, S(j, 0));
    Eigen::VectorXd a(e - s + 1);
    double z = 0.0;
    for (int j = s; j <= e; j++) z += (a(j - s) = std::exp(S(j, 0) - mx));
    a /= z;
    out.row(i).setZero();
    for (int j = s; j <= e; j++) out.row(i) += a(j - s) * X.row(j);
    alphas->push_back(std::move(a));
  }

  int id = t->push(std::move(out));
  t->set_backward(id, [t, id, xi = x.id, si = scores.id, alphas,
                       spans = std::move(spans)] {
    const Mat& X = t->value(xi);
    const Mat& dy = t->grad(id);
    for (size_t i = 0; i < spans.size(); i++) {
      auto [s, e] = spans[i];
      const Eigen::VectorXd& a = (*alphas)[i];
      double dot_sum = 0.0;
      Eigen::VectorXd da(e - s + 1);
      for (int j = s; j <= e; j++) {
        da(j - s) = dy.row(i).dot(X.row(j));
        dot_sum += a(j - s) * da(j - s);
      }
      for (int j = s; j <= e; j++) {
        t->grad(xi).row(j) += a(j - s) * dy.row(i);
        t->grad(si)(j, 0) += a(j - s) * (da(j - s) - dot_sum);
      }
    }
  });
  return {t, id};
}

Var marginal_nll(Var scores, std::vector<int> gold_rows, bool eps_gold) {
  Tape* t = scores.tape;
  if (gold_rows.empty() && !eps_gold)
    throw std::logic_error("marginal_nll without gold options");
  const Mat& S = scores.value();
  const long n = S.rows();

  // log-sum-exp over all options (dummy score 0 included).
  double mx = 0.0;
  for (long r = 0; r < n; r++) mx = std::max(mx, S(r, 0));
  double z_all = std::exp(0.0 - mx);
  for (long r = 0; r < n; r++) z_all += std::exp(S(r, 0) - mx);
  double lse_all = mx + std::log(z_all);

  double z_gold = eps_gold ? std::exp(0.0 - mx) : 0.0;
  for (int r : gold_rows) z_gold += std::exp(S(r, 0) - mx);
  double lse_gold = mx + std::log(z_gold);

  Mat v(1, 1);
  v(0, 0) = lse_all - lse_gold;
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, si = scores.id, gold_rows = std::move(gold_rows),
                       lse_all, lse_gold] {
    const Mat& S = t->value(si);
    const double g = t->grad(id)(0, 0);
    Mat& dS = t->grad(si);
    for (long r = 0; r < S.rows(); r++)
      dS(r, 0) += g * std::exp(S(r, 0) - lse_all);
    for (int r : gold_rows) dS(r, 0) -= g * std::exp(S(r, 0) - lse_gold);
  });
  return {t, id};
}

double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

Var bce_with_logits(Var logits, std::vector<double> targets) {
  Tape* t = logits.tape;
  const Mat& X = logits.value();
  if (X.rows() != static_cast<long>(targets.size()))
    throw std::logic_error("bce_with_logits target size mismatch");
  double loss = 0.0;
  for (long r = 0; r < X.rows(); r++)
    loss += softplus(X(r, 0)) - targets[r] * X(r, 0);
  Mat v(1, 1);
  v(0, 0) = loss;
  int id = t->push(std::move(v));
  t->set_backward(id, [t, id, li = logits.id, targets = std::move(targets)] {
    const Mat& X = t->value(li);
    const double g = t->grad(id)(0, 0);
    for (long r = 0; r < X.rows(); r++) {
      double sig = 0.5 * (1.0 + std::tanh(0.5 * X(r, 0)));
      t->grad(li)(r, 0) += g * (sig - targets[r]);
    }
  });
  return {t, id};
}

}  // namespace coref::nn
