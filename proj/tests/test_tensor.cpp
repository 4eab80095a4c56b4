#include <doctest.h>

#include <cmath>

#include "bayman/rng.hpp"
#include "bayman/tensor.hpp"

using namespace bayman;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
  }
  return m;
}

}  // namespace

TEST_CASE("forward values of the basic ops") {
  Tape tape;
  Rng rng(1);

  SUBCASE("matmul with the identity is the identity map") {
    const Matrix a = random_matrix(3, 3, rng);
    const Tensor ta = tape.constant(a);
    const Tensor id = tape.constant(Matrix::Identity(3, 3));
    CHECK((matmul(ta, id).value() - a).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("row_softmax of a zero row is uniform") {
    const Tensor t = tape.constant(Matrix::Zero(1, 4));
    const Matrix s = row_softmax(t).value();
    for (int j = 0; j < 4; ++j) CHECK(s(0, j) == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("gather_rows duplicates and reorders rows") {
    Matrix a(2, 3);
    a << 1, 2, 3, 4, 5, 6;
    const Tensor t = tape.constant(a);
    const Matrix g = gather_rows(t, {1, 1, 0}).value();
    REQUIRE(g.rows() == 3);
    CHECK((g.row(0) - a.row(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.row(1) - a.row(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.row(2) - a.row(0)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("scatter_cols places columns and zero-fills the rest") {
    Matrix a(1, 2);
    a << 5, 7;
    const Matrix s = scatter_cols(tape.constant(a), {3, 0}, 5).value();
    CHECK(s(0, 0) == 7);
    CHECK(s(0, 3) == 5);
    CHECK(s(0, 1) == 0);
    CHECK(s(0, 2) == 0);
    CHECK(s(0, 4) == 0);
  }
  SUBCASE("row broadcast add") {
    Matrix a(2, 2), b(1, 2);
    a << 1, 2, 3, 4;
    b << 10, 20;
    const Matrix out = add(tape.constant(a), tape.constant(b)).value();
    CHECK(out(0, 0) == 11);
    CHECK(out(1, 1) == 24);
  }
  SUBCASE("relu clamps negatives and keeps positives") {
    Matrix a(1, 3);
    a << -1, 0, 2;
    const Matrix out = relu(tape.constant(a)).value();
    CHECK(out(0, 0) == 0);
    CHECK(out(0, 1) == 0);
    CHECK(out(0, 2) == 2);
  }
}

TEST_CASE("shape errors name the op and both shapes") {
  Tape tape;
  const Tensor a = tape.constant(Matrix::Zero(3, 4));
  const Tensor b = tape.constant(Matrix::Zero(5, 2));
  CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: incompatible shapes 3x4 and 5x2",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(add(a, b), "add: incompatible shapes 3x4 and 5x2", std::invalid_argument);
  CHECK_THROWS_AS(hadamard(a, b), std::invalid_argument);
  CHECK_THROWS_AS(concat_cols(a, b), std::invalid_argument);
}

TEST_CASE("backward computes exact adjoints for simple graphs") {
  SUBCASE("sum(x . x) has gradient 2x") {
    Tape tape;
    Rng rng(2);
    const Matrix x = random_matrix(3, 4, rng);
    const Tensor tx = tape.variable(x);
    const Tensor loss = sum_all(hadamard(tx, tx));
    tape.backward(loss);
    CHECK((tx.grad() - 2.0 * x).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("sum(x W) has gradient ones * W^T") {
    Tape tape;
    Rng rng(3);
    const Matrix x = random_matrix(2, 3, rng);
    const Matrix w = random_matrix(3, 5, rng);
    const Tensor tx = tape.variable(x);
    const Tensor loss = sum_all(matmul(tx, tape.constant(w)));
    tape.backward(loss);
    const Matrix expected = Matrix::Ones(2, 5) * w.transpose();
    CHECK((tx.grad() - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("a tensor off the loss path keeps a zero gradient") {
    Tape tape;
    const Tensor used = tape.variable(Matrix::Ones(2, 2));
    const Tensor unused = tape.variable(Matrix::Ones(2, 2));
    tape.backward(sum_all(used));
    CHECK(unused.grad().cwiseAbs().maxCoeff() == 0.0);
    CHECK(used.grad().minCoeff() == 1.0);
  }
  SUBCASE("repeated backward accumulates") {
    Tape tape;
    const Tensor x = tape.variable(Matrix::Ones(1, 1));
    const Tensor loss = sum_all(hadamard(x, x));
    tape.backward(loss);
    tape.backward(loss);
    CHECK(x.grad()(0, 0) == doctest::Approx(4.0));  // 2x accumulated twice
  }
  SUBCASE("non-scalar loss errors") {
    Tape tape;
    const Tensor x = tape.variable(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
  }
}

TEST_CASE("softmax rows are positive and sum to one") {
  Tape tape;
  Rng rng(4);
  const Tensor t = tape.constant(random_matrix(6, 9, rng, 30.0));
  const Matrix s = row_softmax(t).value();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    CHECK(std::abs(s.row(i).sum() - 1.0) <= 1e-12);
    CHECK(s.row(i).minCoeff() > 0.0);
  }
}

TEST_CASE("relu masked by its positive support is itself") {
  Tape tape;
  Rng rng(5);
  const Matrix x = random_matrix(4, 4, rng);
  const Matrix r = relu(tape.constant(x)).value();
  const Matrix masked = r.cwiseProduct((x.array() > 0.0).cast<double>().matrix());
  CHECK((masked - r).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("finite differences agree with reverse mode") {
  SUBCASE("quadratic: expected near machine precision") {
    Rng rng(6);
    const auto f = [](Tape& t, const std::vector<Tensor>& p) {
      (void)t;
      return sum_all(hadamard(p[0], p[0]));
    };
    const FdCheckReport report = finite_difference_check(f, {random_matrix(3, 4, rng)});
    CHECK(report.max_rel_err < 1e-7);
  }
  SUBCASE("tanh and softmax composition on a 3x4 input") {
    Rng rng(7);
    const auto f = [](Tape& t, const std::vector<Tensor>& p) {
      (void)t;
      return sum_all(hadamard(row_softmax(tanh_act(p[0])), p[1]));
    };
    const FdCheckReport report =
        finite_difference_check(f, {random_matrix(3, 4, rng), random_matrix(3, 4, rng)});
    CHECK(report.max_rel_err < 1e-4);
  }
  SUBCASE("constant function: both gradients zero") {
    const auto f = [](Tape& t, const std::vector<Tensor>& p) {
      (void)p;
      return t.scalar(3.5);
    };
    const FdCheckReport report = finite_difference_check(f, {Matrix::Ones(2, 2)});
    CHECK(report.max_rel_err == 0.0);
  }
  SUBCASE("composites over the whole op set stay under 1e-4") {
    for (const std::uint64_t seed : {11u, 12u, 13u}) {
      Rng rng(seed);
      const Matrix a = random_matrix(3, 4, rng);
      const Matrix b = random_matrix(4, 3, rng);
      const Matrix v = random_matrix(1, 4, rng);
      const auto f = [](Tape& t, const std::vector<Tensor>& p) {
        const Tensor prod = matmul(p[0], p[1]);            // 3x3
        const Tensor act = tanh_act(prod);
        const Tensor soft = row_softmax(scale(act, 2.0));
        const Tensor mixed = matmul(soft, p[0]);           // 3x4
        const Tensor gated = hadamard_rowvec(mixed, p[2]);
        const Tensor gathered = gather_rows(gated, {2, 0, 1, 1});
        const Tensor top = concat_cols(gathered, relu(gathered));
        const Tensor pref = sum_rows(top);
        const Tensor placed = scatter_cols(pref, {1, 4, 0, 6, 2, 3, 5, 7}, 9);
        const Tensor squashed = clamp(row_softmax(placed), 1e-12, 1.0 - 1e-12);
        return scale(sum_all(hadamard(squashed, log_elementwise(squashed))), -1.0);
      };
      const FdCheckReport report = finite_difference_check(f, {a, b, v});
      CAPTURE(seed);
      CHECK(report.max_rel_err < 1e-4);
    }
  }
  SUBCASE("broadcast add/subtract backward") {
    Rng rng(14);
    const auto f = [](Tape& t, const std::vector<Tensor>& p) {
      (void)t;
      const Tensor shifted = add(p[0], p[1]);
      const Tensor dropped = subtract(shifted, p[1]);
      return sum_all(hadamard(tanh_act(shifted), dropped));
    };
    const FdCheckReport report =
        finite_difference_check(f, {random_matrix(4, 3, rng), random_matrix(1, 3, rng)});
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("finite_difference_check rejects a non-deterministic function") {
  int calls = 0;
  const auto f = [&calls](Tape& t, const std::vector<Tensor>& p) {
    (void)p;
    return t.scalar(static_cast<double>(++calls));
  };
  CHECK_THROWS_WITH_AS(finite_difference_check(f, {Matrix::Ones(1, 1)}),
                       doctest::Contains("not deterministic"), std::runtime_error);
}

TEST_CASE("forward evaluation is deterministic") {
  Rng rng(15);
  const Matrix a = random_matrix(5, 5, rng);
  auto run = [&a]() {
    Tape tape;
    const Tensor t = tape.constant(a);
    return Matrix(row_softmax(matmul(tanh_act(t), t)).value());
  };
  const Matrix first = run();
  const Matrix second = run();
  CHECK((first - second).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("check_finite flags non-finite results when enabled") {
  Tape tape;
  tape.set_check_finite(true);
  Matrix bad(1, 1);
  bad << 0.0;
  const Tensor t = tape.constant(bad);
  CHECK_THROWS_WITH_AS(log_elementwise(t), doctest::Contains("non-finite"), std::runtime_error);
}
