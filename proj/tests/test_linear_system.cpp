#include <random>

#include "doctest.h"
#include "zoomctl/linear_system.hpp"

using namespace zoomctl;

namespace {

LinearSystem two_sensor_diag23() {
  Matrix A(2, 2);
  A << 2, 0, 0, 3;
  Matrix C1(1, 2), C2(1, 2);
  C1 << 0, 1;
  C2 << 1, 0;
  return LinearSystem(A, Matrix::Identity(2, 2), {C1, C2});
}

}  // namespace

TEST_CASE("step matches the state recursion") {
  SUBCASE("exact cancellation") {
    LinearSystem sys{Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0),
                     {Matrix::Constant(1, 1, 1.0)}};
    Vector x(1), u(1), w(1);
    x << 1;
    u << -2;
    w << 0;
    CHECK(step(sys, x, u, w)(0) == 0.0);
  }

  SUBCASE("hand-checked 2x2") {
    Matrix A(2, 2);
    A << 2, 1, 0, 2;
    LinearSystem sys{A, Matrix::Identity(2, 2), {Matrix::Identity(2, 2)}};
    Vector x(2), u(2), w(2);
    x << 1, 1;
    u << 0, 0;
    w << 0.5, -0.5;
    const Vector next = step(sys, x, u, w);
    CHECK(next(0) == doctest::Approx(3.5));
    CHECK(next(1) == doctest::Approx(1.5));
  }

  SUBCASE("identity dynamics fixes the state") {
    LinearSystem sys{Matrix::Identity(3, 3), Matrix::Identity(3, 3),
                     {Matrix::Identity(3, 3)}};
    Vector x(3);
    x << 0.25, -4, 17;
    CHECK((step(sys, x, Vector::Zero(3), Vector::Zero(3)) - x).norm() == 0.0);
  }

  SUBCASE("dimension mismatch throws") {
    LinearSystem sys{Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0),
                     {Matrix::Constant(1, 1, 1.0)}};
    CHECK_THROWS_AS(step(sys, Vector::Zero(2), Vector::Zero(1),
                         Vector::Zero(1)),
                    InputError);
  }
}

TEST_CASE("observe projects through the sensor matrix") {
  Matrix A = Matrix::Identity(2, 2) * 2.0;
  Matrix C1(1, 2), C2(1, 2);
  C1 << 1, 0;
  C2 << 0, 1;
  LinearSystem sys{A, Matrix::Identity(2, 2), {C1, C2}};
  Vector x(2);
  x << 3, 7;

  CHECK(observe(sys, 0, x, Vector::Zero(1))(0) == 3.0);
  CHECK(observe(sys, 1, x, Vector::Constant(1, 0.25))(0) == 7.25);
  CHECK_THROWS_AS(observe(sys, 2, x, Vector::Zero(1)), InputError);

  LinearSystem eye{A, Matrix::Identity(2, 2), {Matrix::Identity(2, 2)}};
  CHECK((observe(eye, 0, x, Vector::Zero(2)) - x).norm() == 0.0);
}

TEST_CASE("observability matrix stacking") {
  SUBCASE("2-D example") {
    Matrix A(2, 2), C(1, 2);
    A << 2, 1, 0, 2;
    C << 1, 0;
    const Matrix O = observability_matrix(C, A);
    REQUIRE(O.rows() == 2);
    CHECK(O(0, 0) == 1.0);
    CHECK(O(0, 1) == 0.0);
    CHECK(O(1, 0) == 2.0);
    CHECK(O(1, 1) == 1.0);
  }

  SUBCASE("n = 1 is just C") {
    const Matrix O = observability_matrix(Matrix::Identity(1, 1),
                                          Matrix::Constant(1, 1, 5.0));
    CHECK(O.rows() == 1);
    CHECK(O(0, 0) == 1.0);
  }

  SUBCASE("rank-deficient sensor") {
    Matrix A(2, 2), C(1, 2);
    A << 2, 1, 0, 3;
    C << 0, 1;
    const Matrix O = observability_matrix(C, A);
    CHECK(O(1, 0) == 0.0);
    CHECK(O(1, 1) == 3.0);
    CHECK(numeric_rank(O) == 1);
  }

  SUBCASE("shape is (n p) x n") {
    std::mt19937 gen(7);
    std::normal_distribution<double> dist;
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 1 + trial % 4;
      const int p = 1 + trial % 3;
      Matrix A(n, n), C(p, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = dist(gen);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < n; ++j) C(i, j) = dist(gen);
      const Matrix O = observability_matrix(C, A);
      CHECK(O.rows() == n * p);
      CHECK(O.cols() == n);
    }
  }
}

TEST_CASE("assumption checks") {
  SUBCASE("diag(2,3) with swapped single-output sensors") {
    const AssumptionReport rep = check_assumptions(two_sensor_diag23());
    CHECK(rep.controllable);
    CHECK(rep.jointly_observable);
    REQUIRE(rep.per_sensor_observable.size() == 2);
    CHECK_FALSE(rep.per_sensor_observable[0]);
    CHECK_FALSE(rep.per_sensor_observable[1]);
    CHECK(rep.all_modes_unstable);
    CHECK(rep.unstable_eigenvalues.size() == 2);
  }

  SUBCASE("zero input matrix is uncontrollable") {
    LinearSystem sys{Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 0.0),
                     {Matrix::Constant(1, 1, 1.0)}};
    CHECK_FALSE(check_assumptions(sys).controllable);
  }

  SUBCASE("stable mode reports no unstable eigenvalues") {
    LinearSystem sys{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0),
                     {Matrix::Constant(1, 1, 1.0)}};
    const AssumptionReport rep = check_assumptions(sys);
    CHECK(rep.unstable_eigenvalues.empty());
    CHECK_FALSE(rep.all_modes_unstable);
  }

  SUBCASE("repeat calls agree") {
    const AssumptionReport a = check_assumptions(two_sensor_diag23());
    const AssumptionReport b = check_assumptions(two_sensor_diag23());
    CHECK(a.controllable == b.controllable);
    CHECK(a.jointly_observable == b.jointly_observable);
    CHECK(a.per_sensor_observable == b.per_sensor_observable);
    CHECK(a.unstable_eigenvalues.size() == b.unstable_eigenvalues.size());
  }
}

TEST_CASE("step/observe linearity") {
  std::mt19937 gen(11);
  std::normal_distribution<double> dist;
  Matrix A(3, 3), B(3, 2), C(2, 3);
  for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = dist(gen);
  for (int i = 0; i < 6; ++i) B(i / 2, i % 2) = dist(gen);
  for (int i = 0; i < 6; ++i) C(i / 3, i % 3) = dist(gen);
  LinearSystem sys{A, B, {C}};

  for (int rep = 0; rep < 50; ++rep) {
    Vector x1(3), x2(3), u1(2), u2(2), w1(3), w2(3);
    for (int i = 0; i < 3; ++i) {
      x1(i) = dist(gen);
      x2(i) = dist(gen);
      w1(i) = dist(gen);
      w2(i) = dist(gen);
    }
    for (int i = 0; i < 2; ++i) {
      u1(i) = dist(gen);
      u2(i) = dist(gen);
    }
    const Vector lhs = step(sys, x1 + x2, u1 + u2, w1 + w2);
    const Vector rhs = step(sys, x1, u1, w1) + step(sys, x2, u2, w2) -
                       step(sys, Vector::Zero(3), Vector::Zero(2),
                            Vector::Zero(3));
    CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("construction validates covariances") {
  Matrix A = Matrix::Constant(1, 1, 2.0);
  Matrix B = Matrix::Constant(1, 1, 1.0);
  Matrix C = Matrix::Constant(1, 1, 1.0);
  Matrix bad = Matrix::Constant(1, 1, -1.0);
  CHECK_THROWS_AS(LinearSystem(A, B, {C}, bad, {Matrix::Identity(1, 1)},
                               Vector::Zero(1), Matrix::Identity(1, 1)),
                  InputError);
  Matrix asym(2, 2);
  asym << 1, 0.5, -0.5, 1;
  Matrix A2 = Matrix::Identity(2, 2) * 2;
  CHECK_THROWS_AS(LinearSystem(A2, Matrix::Identity(2, 2),
                               {Matrix::Identity(2, 2)}, asym,
                               {Matrix::Identity(2, 2)}, Vector::Zero(2),
                               Matrix::Identity(2, 2)),
                  InputError);
}
