#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "corefkit/nn.hpp"
#include "corefkit/rng.hpp"

using namespace coref;
using nn::Mat;
using nn::Var;

namespace {

Mat random_mat(RandomStream& rng, long rows, long cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (long r = 0; r < rows; r++)
    for (long c = 0; c < cols; c++) m(r, c) = scale * rng.normal();
  return m;
}

// Central-difference check of a scalar-valued graph against the tape
// gradients, over every entry of every input matrix.
void check_gradients(std::vector<Mat> inputs,
                     const std::function<Var(nn::Tape&, std::vector<Var>&)>& f,
                     double eps = 1e-5, double tol = 1e-7) {
  auto eval = [&](const std::vector<Mat>& ins) {
    nn::Tape tape;
    std::vector<Var> vars;
    for (const Mat& m : ins) vars.push_back(nn::leaf(tape, m));
    return f(tape, vars).value()(0, 0);
  };

  nn::Tape tape;
  std::vector<Var> vars;
  for (const Mat& m : inputs) vars.push_back(nn::leaf(tape, m));
  Var loss = f(tape, vars);
  tape.backward(loss.id);

  for (size_t v = 0; v < inputs.size(); v++) {
    for (long r = 0; r < inputs[v].rows(); r++) {
      for (long c = 0; c < inputs[v].cols(); c++) {
        std::vector<Mat> plus = inputs, minus = inputs;
        plus[v](r, c) += eps;
        minus[v](r, c) -= eps;
        double numeric = (eval(plus) - eval(minus)) / (2 * eps);
        double analytic = vars[v].grad()(r, c);
        double err = std::abs(numeric - analytic) /
                     std::max({1.0, std::abs(numeric), std::abs(analytic)});
        INFO("input ", v, " entry (", r, ",", c, "): analytic ", analytic,
             " numeric ", numeric);
        CHECK(err < tol);
      }
    }
  }
}

}  // namespace

TEST_CASE("gradients of elementwise and matmul ops") {
  RandomStream rng(7);
  check_gradients(
      {random_mat(rng, 3, 4), random_mat(rng, 4, 2), random_mat(rng, 3, 2)},
      [](nn::Tape& t, std::vector<Var>& v) {
        Var y = nn::add(nn::matmul(v[0], v[1]), v[2]);
        return nn::sum_all(nn::vtanh(y));
      });
  check_gradients({random_mat(rng, 2, 3), random_mat(rng, 4, 3)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    return nn::sum_all(nn::vsigmoid(nn::matmul_nt(v[0], v[1])));
                  });
  check_gradients({random_mat(rng, 3, 3), random_mat(rng, 3, 3)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    return nn::sum_all(nn::hadamard(v[0], nn::scale(v[1], 2.5)));
                  });
}

TEST_CASE("gradients of broadcast, concat, repeat") {
  RandomStream rng(8);
  check_gradients({random_mat(rng, 3, 4), random_mat(rng, 1, 4)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    return nn::sum_all(nn::vtanh(nn::add_rowvec(v[0], v[1])));
                  });
  check_gradients({random_mat(rng, 3, 2), random_mat(rng, 3, 3)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    Var c = nn::concat_cols({v[0], v[1]});
                    return nn::sum_all(nn::vtanh(c));
                  });
  check_gradients({random_mat(rng, 2, 3), random_mat(rng, 4, 3)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    Var c = nn::concat_rows({v[0], v[1]});
                    return nn::sum_all(nn::vsigmoid(c));
                  });
  check_gradients({random_mat(rng, 1, 4)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    Var r = nn::repeat_rows(v[0], 3);
                    return nn::sum_all(nn::vtanh(r));
                  });
}

TEST_CASE("gradients of gathers, including the -1 zero row") {
  RandomStream rng(9);
  check_gradients({random_mat(rng, 5, 3)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    Var g = nn::gather_rows(v[0], {4, 0, 0, -1, 2});
                    return nn::sum_all(nn::vtanh(g));
                  });
  check_gradients({random_mat(rng, 4, 4)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    Var g = nn::gather_elems(v[0], {{0, 1}, {3, 3}, {0, 1}});
                    return nn::sum_all(nn::vtanh(g));
                  });
}

TEST_CASE("gather_rows maps -1 to a zero row") {
  nn::Tape tape;
  Mat m(2, 2);
  m << 1, 2, 3, 4;
  Var g = nn::gather_rows(nn::leaf(tape, m), {1, -1});
  CHECK(g.value()(0, 0) == 3);
  CHECK(g.value()(1, 0) == 0);
  CHECK(g.value()(1, 1) == 0);
}

TEST_CASE("local attention gradients") {
  RandomStream rng(10);
  const int T = 7, d = 4, window = 4;
  Mat relpos = random_mat(rng, window, d, 0.5);
  check_gradients(
      {random_mat(rng, T, d), random_mat(rng, T, d), random_mat(rng, T, d)},
      [&](nn::Tape& t, std::vector<Var>& v) {
        Var y = nn::local_attention(v[0], v[1], v[2], relpos, window);
        return nn::sum_all(nn::vtanh(y));
      },
      1e-5, 1e-6);
}

TEST_CASE("local attention window and determinism") {
  // Two tokens with identical windows must get identical outputs.
  RandomStream rng(11);
  const int d = 4, window = 4;
  Mat relpos = random_mat(rng, window, d, 0.5);
  Mat x(8, d);
  Mat block = random_mat(rng, 4, d);
  x.topRows(4) = block;
  x.bottomRows(4) = block;  // same 4-token context repeated

  nn::Tape tape;
  Var q = nn::leaf(tape, x), k = nn::leaf(tape, x), v = nn::leaf(tape, x);
  Var y = nn::local_attention(q, k, v, relpos, window);
  // Token 2 sees rows 0..3; token 6 sees rows 4..7 with the same contents
  // and the same relative offsets.
  CHECK((y.value().row(2) - y.value().row(6)).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("span attention gradients and values") {
  RandomStream rng(12);
  check_gradients(
      {random_mat(rng, 6, 3), random_mat(rng, 6, 1)},
      [](nn::Tape& t, std::vector<Var>& v) {
        Var y = nn::span_attention(v[0], v[1], {{0, 2}, {2, 5}, {4, 4}});
        return nn::sum_all(nn::vtanh(y));
      });

  // A single-token span is just that token's row.
  nn::Tape tape;
  Mat x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  Mat s = Mat::Zero(3, 1);
  Var y = nn::span_attention(nn::leaf(tape, x), nn::leaf(tape, s), {{1, 1}});
  CHECK(y.value()(0, 0) == 3);
  CHECK(y.value()(0, 1) == 4);
}

TEST_CASE("marginal_nll value and gradients") {
  // Hand-checked: scores (1, 2), gold = {row 1}.
  // lse_all = log(e^0 + e^1 + e^2), lse_gold = 2.
  nn::Tape tape;
  Mat s(2, 1);
  s << 1, 2;
  Var loss = nn::marginal_nll(nn::leaf(tape, s), {1}, false);
  double expect = std::log(1 + std::exp(1) + std::exp(2)) - 2;
  CHECK(loss.value()(0, 0) == doctest::Approx(expect).epsilon(1e-12));

  RandomStream rng(13);
  check_gradients({random_mat(rng, 5, 1)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    return nn::marginal_nll(v[0], {1, 3}, false);
                  });
  check_gradients({random_mat(rng, 5, 1)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    return nn::marginal_nll(v[0], {0}, true);
                  });
  // Gold = all options: loss exactly 0 regardless of scores.
  nn::Tape t2;
  Var l2 = nn::marginal_nll(nn::leaf(t2, s), {0, 1}, true);
  CHECK(l2.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("bce_with_logits value and gradients") {
  nn::Tape tape;
  Mat x(2, 1);
  x << 0.0, 100.0;  // extreme logit must not overflow
  Var loss = nn::bce_with_logits(nn::leaf(tape, x), {1.0, 1.0});
  CHECK(loss.value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  RandomStream rng(14);
  check_gradients({random_mat(rng, 6, 1)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    return nn::bce_with_logits(v[0],
                                               {1, 0, 1, 1, 0, 0});
                  });
}

TEST_CASE("sum of losses accumulates gradients from both paths") {
  RandomStream rng(15);
  check_gradients({random_mat(rng, 4, 1)},
                  [](nn::Tape& t, std::vector<Var>& v) {
                    Var a = nn::marginal_nll(v[0], {0}, false);
                    Var b = nn::bce_with_logits(v[0], {1, 0, 0, 1});
                    return nn::add(a, b);
                  });
}

TEST_CASE("backward rejects non-scalar roots") {
  nn::Tape tape;
  Var v = nn::leaf(tape, Mat::Zero(2, 2));
  CHECK_THROWS_AS(tape.backward(v.id), std::logic_error);
}
