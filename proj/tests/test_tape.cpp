#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <vector>

#include "lfr/ad/tape.hpp"
#include "lfr/core/rng.hpp"

using namespace lfr;
using ad::Tape;
using ad::Var;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

/// Max relative gradient error of a scalar-valued tape program against
/// central finite differences over every input coordinate.
double check_gradients(
    std::vector<Eigen::MatrixXd> inputs,
    const std::function<Var(Tape&, const std::vector<Var>&)>& program,
    double h = 1e-6) {
  auto eval = [&](const std::vector<Eigen::MatrixXd>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.leaf(x, false));
    return tape.value(program(tape, vars))(0, 0);
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.leaf(x, true));
  Var out = program(tape, vars);
  REQUIRE(tape.value(out).size() == 1);
  tape.backward(out);

  double worst = 0.0;
  for (size_t v = 0; v < inputs.size(); ++v) {
    const Eigen::MatrixXd& g = tape.grad(vars[v]);
    for (int r = 0; r < inputs[v].rows(); ++r) {
      for (int c = 0; c < inputs[v].cols(); ++c) {
        std::vector<Eigen::MatrixXd> xs = inputs;
        xs[v](r, c) += h;
        double up = eval(xs);
        xs[v](r, c) -= 2.0 * h;
        double down = eval(xs);
        double fd = (up - down) / (2.0 * h);
        double an = g.size() > 0 ? g(r, c) : 0.0;
        double rel =
            std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

/// Contracts any matrix to a scalar with fixed pseudo-random weights so
/// every entry influences the output.
Var contract(Tape& tape, Var x) {
  const Eigen::MatrixXd& v = tape.value(x);
  Eigen::MatrixXd left(1, v.rows()), right(v.cols(), 1);
  for (int i = 0; i < v.rows(); ++i) left(0, i) = std::sin(1.3 * i + 0.7);
  for (int i = 0; i < v.cols(); ++i) right(i, 0) = std::cos(0.9 * i - 0.2);
  return tape.matmul(tape.matmul(tape.constant(left), x),
                     tape.constant(right));
}

}  // namespace

TEST_CASE("values are computed eagerly and correctly") {
  Rng rng(1);
  Eigen::MatrixXd a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng);
  Eigen::MatrixXd w = random_matrix(4, 2, rng);
  Tape tape;
  Var va = tape.leaf(a, false), vb = tape.leaf(b, false);
  CHECK((tape.value(tape.add(va, vb)) - (a + b)).norm() == 0.0);
  CHECK((tape.value(tape.sub(va, vb)) - (a - b)).norm() == 0.0);
  CHECK((tape.value(tape.scale(va, 2.5)) - 2.5 * a).norm() == 0.0);
  Var vw = tape.leaf(w, false);
  CHECK((tape.value(tape.matmul(va, vw)) - a * w).norm() < 1e-14);
  CHECK((tape.value(tape.matmul_nt(va, vb)) - a * b.transpose()).norm() < 1e-14);
  CHECK((tape.value(tape.matmul_tn(va, vb)) - a.transpose() * b).norm() < 1e-14);

  Eigen::MatrixXd row = random_matrix(1, 4, rng);
  Var vrow = tape.leaf(row, false);
  Eigen::MatrixXd expect = a;
  expect.rowwise() += row.row(0);
  CHECK((tape.value(tape.add_row_broadcast(va, vrow)) - expect).norm() == 0.0);
  CHECK(tape.value(tape.repeat_row(vrow, 5)).rows() == 5);

  // softmax rows sum to one.
  Eigen::MatrixXd s = tape.value(tape.softmax_rows(va));
  for (int r = 0; r < s.rows(); ++r) {
    CHECK(s.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.row(r).minCoeff() > 0.0);
  }

  // sigmoid(0) = 0.5, gelu(0) = 0.
  Var z = tape.constant(Eigen::MatrixXd::Zero(1, 1));
  CHECK(tape.value(tape.sigmoid(z))(0, 0) == 0.5);
  CHECK(tape.value(tape.gelu(z))(0, 0) == 0.0);
}

TEST_CASE("masked softmax sends -1e9 logits to exactly zero") {
  Tape tape;
  Eigen::MatrixXd logits(1, 4);
  logits << 0.3, -1e9, 1.2, -1e9;
  Eigen::MatrixXd s = tape.value(tape.softmax_rows(tape.leaf(logits, false)));
  CHECK(s(0, 1) == 0.0);
  CHECK(s(0, 3) == 0.0);
  CHECK(s.row(0).sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("gradients match finite differences for every op") {
  Rng rng(2);

  CHECK(check_gradients({random_matrix(3, 4, rng), random_matrix(3, 4, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.add(v[0], v[1]));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(3, 4, rng), random_matrix(3, 4, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.sub(v[0], v[1]));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(2, 5, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.scale(v[0], -1.7));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(4, 3, rng), random_matrix(1, 3, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.add_row_broadcast(v[0], v[1]));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(1, 6, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.repeat_row(v[0], 3));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(3, 2, rng), random_matrix(3, 4, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.concat_cols({v[0], v[1]}));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(2, 4, rng), random_matrix(3, 4, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.concat_rows({v[0], v[1]}));
                        }) < 1e-7);

  ad::GatherTaps taps{{{0, 0.25}, {2, 0.75}}, {{1, 1.0}}, {}};
  CHECK(check_gradients({random_matrix(4, 3, rng)},
                        [&](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.gather_rows(v[0], taps));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(3, 4, rng), random_matrix(4, 2, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.matmul(v[0], v[1]));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(3, 4, rng), random_matrix(2, 4, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.matmul_nt(v[0], v[1]));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(4, 3, rng), random_matrix(4, 2, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.matmul_tn(v[0], v[1]));
                        }) < 1e-7);

  CHECK(check_gradients({random_matrix(3, 4, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.gelu(v[0]));
                        }) < 1e-6);

  CHECK(check_gradients({random_matrix(3, 4, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.sigmoid(v[0]));
                        }) < 1e-6);

  CHECK(check_gradients({random_matrix(3, 5, rng)},
                        [](Tape& t, const std::vector<Var>& v) {
                          return contract(t, t.softmax_rows(v[0]));
                        }) < 1e-6);

  CHECK(check_gradients(
            {random_matrix(4, 6, rng), Eigen::MatrixXd::Ones(1, 6),
             Eigen::MatrixXd::Zero(1, 6)},
            [](Tape& t, const std::vector<Var>& v) {
              return contract(t, t.layernorm_rows(v[0], v[1], v[2]));
            }) < 1e-6);

  Eigen::MatrixXd target = random_matrix(2, 3, rng);
  CHECK(check_gradients({random_matrix(2, 3, rng)},
                        [&](Tape& t, const std::vector<Var>& v) {
                          return t.mean_sq(v[0], target);
                        }) < 1e-7);
}

TEST_CASE("a composite program differentiates correctly") {
  Rng rng(3);
  Eigen::MatrixXd x = random_matrix(5, 4, rng, 0.5);
  Eigen::MatrixXd w1 = random_matrix(4, 8, rng, 0.5);
  Eigen::MatrixXd w2 = random_matrix(8, 4, rng, 0.5);
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Ones(1, 4);
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(1, 4);
  Eigen::MatrixXd target = random_matrix(5, 4, rng);
  double err = check_gradients(
      {x, w1, w2, gamma, beta},
      [&](Tape& t, const std::vector<Var>& v) {
        Var h = t.gelu(t.matmul(v[0], v[1]));
        Var o = t.matmul(h, v[2]);
        Var n = t.layernorm_rows(t.add(v[0], o), v[3], v[4]);
        Var s = t.softmax_rows(n);
        return t.mean_sq(s, target);
      });
  CHECK(err < 1e-5);
}

TEST_CASE("leaves reference external storage without copying") {
  Eigen::MatrixXd external = Eigen::MatrixXd::Constant(2, 2, 1.0);
  Tape tape;
  Var v = tape.leaf(external, true);
  external(0, 0) = 5.0;  // visible through the tape: no copy was taken
  CHECK(tape.value(v)(0, 0) == 5.0);
}

TEST_CASE("tape survives many nodes without invalidating values") {
  // Regression guard for node-address stability during growth.
  Tape tape;
  Var v = tape.constant(Eigen::MatrixXd::Constant(1, 1, 2.0));
  const Eigen::MatrixXd* before = &tape.value(v);
  for (int i = 0; i < 5000; ++i) {
    tape.constant(Eigen::MatrixXd::Zero(1, 1));
  }
  CHECK(before == &tape.value(v));
  CHECK(tape.value(v)(0, 0) == 2.0);
}
