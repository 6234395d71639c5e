#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "mfc/cones.hpp"

using namespace mfc;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("orthant membership, dual, interior") {
  ConeSpec K = ConeSpec::orthant(2);
  CHECK(K.contains(vec({0.0, 1.0})));
  CHECK(!K.contains(vec({-1e-6, 1.0})));
  CHECK(K.dual_contains(vec({2.0, 0.0})));
  CHECK(!K.dual_contains(vec({-1.0, 1.0})));
  CHECK(K.interior_contains(vec({0.5, 0.5})));
  CHECK(!K.interior_contains(vec({0.0, 0.5})));
  CHECK(K.boundary_distance(vec({0.25, 2.0})) == doctest::Approx(0.25));
}

TEST_CASE("zero cone is the origin with full dual") {
  ConeSpec K = ConeSpec::zero(2);
  CHECK(K.contains(vec({0.0, 0.0})));
  CHECK(!K.contains(vec({1e-6, 0.0})));
  CHECK(K.dual_contains(vec({-3.0, 7.0})));
  CHECK(!K.interior_contains(vec({0.0, 0.0})));
}

TEST_CASE("free cone is everything with zero dual") {
  ConeSpec K = ConeSpec::free_space(2);
  CHECK(K.contains(vec({-5.0, 3.0})));
  CHECK(K.interior_contains(vec({-5.0, 3.0})));
  CHECK(K.dual_contains(vec({0.0, 0.0})));
  CHECK(!K.dual_contains(vec({1e-6, 0.0})));
}

TEST_CASE("product cone splits coordinates") {
  ConeSpec K = ConeSpec::product({ConeSpec::orthant(1), ConeSpec::zero(1)});
  CHECK(K.dim() == 2);
  CHECK(K.contains(vec({1.0, 0.0})));
  CHECK(!K.contains(vec({1.0, 1e-6})));
  CHECK(K.dual_contains(vec({1.0, -9.0})));
  CHECK(!K.dual_contains(vec({-1.0, 0.0})));
}

TEST_CASE("polyhedral cone from generators") {
  Eigen::MatrixXd G(2, 2);
  G << 1, 0, 1, 1;  // columns (1,1) and (0,1)
  ConeSpec K = ConeSpec::polyhedral(G);
  CHECK(K.contains(vec({1.0, 1.5})));
  CHECK(K.contains(vec({0.0, 1.0})));
  CHECK(!K.contains(vec({1.0, 0.5})));
  CHECK(!K.contains(vec({-0.1, 1.0})));
  // dual: <xi, g> >= 0 for both generators
  CHECK(K.dual_contains(vec({1.0, 0.0})));
  CHECK(!K.dual_contains(vec({0.0, -1.0})));
  CHECK(K.boundary_distance(vec({0.0, 1.0})) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(K.interior_contains(vec({1.0, 2.0})));
  CHECK(!K.interior_contains(vec({0.0, 1.0})));
}

TEST_CASE("membership tolerance band") {
  ConeSpec K = ConeSpec::orthant(1);
  CHECK(K.contains(vec({-0.5e-10})));        // inside default tolerance
  CHECK(!K.contains(vec({-1e-9})));
  CHECK(K.contains(vec({-0.5e-3}), 1e-3));   // loose tolerance
}

TEST_CASE("box membership and projection") {
  BoxSet box(vec({0.0, -1.0}), vec({1.0, 1.0}));
  CHECK(box.contains(vec({0.5, 0.0})));
  CHECK(!box.contains(vec({1.5, 0.0})));
  CHECK(box.project(vec({2.0, -3.0})) == vec({1.0, -1.0}));
  CHECK_THROWS_AS(BoxSet(vec({1.0}), vec({0.0})), std::invalid_argument);

  BoxSet whole = BoxSet::whole_space(2);
  CHECK(whole.contains(vec({1e9, -1e9})));
}

TEST_CASE("normal cone residual of a box") {
  BoxSet box(vec({0.0}), vec({1.0}));
  // interior point: only xi = 0 lies in the normal cone
  CHECK(normal_cone_residual(box, vec({0.5}), vec({0.0})) == doctest::Approx(0.0));
  CHECK(normal_cone_residual(box, vec({0.5}), vec({1.0})) > 0.4);
  // lower face: outward direction is negative
  CHECK(normal_cone_residual(box, vec({0.0}), vec({-2.0})) == doctest::Approx(0.0));
  CHECK(normal_cone_residual(box, vec({0.0}), vec({2.0})) > 1.0);
  // upper face: outward direction is positive
  CHECK(normal_cone_residual(box, vec({1.0}), vec({3.0})) == doctest::Approx(0.0));
  CHECK_THROWS(normal_cone_residual(box, vec({2.0}), vec({0.0})));
}

TEST_CASE("nonnegative least squares on generators") {
  Eigen::MatrixXd G = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd w = nnls(G, vec({1.0, -1.0}));
  CHECK(w(0) == doctest::Approx(1.0));
  CHECK(w(1) == doctest::Approx(0.0));
  CHECK((G * w - vec({1.0, -1.0})).norm() == doctest::Approx(1.0));

  Eigen::MatrixXd G2(2, 3);
  G2 << 1, 0, 1, 0, 1, 1;
  Eigen::VectorXd w2 = nnls(G2, vec({2.0, 3.0}));
  CHECK((G2 * w2 - vec({2.0, 3.0})).norm() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(w2.minCoeff() >= 0.0);
}
