#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "seqrecall/numkit.hpp"

using namespace seqrecall;

TEST_CASE("softmax: symmetry, analytic values, overflow safety") {
  Vector two(2);
  two << 0.0, 0.0;
  Vector p = softmax(two);
  CHECK(p[0] == Catch::Approx(0.5).margin(1e-15));
  CHECK(p[1] == Catch::Approx(0.5).margin(1e-15));

  two << std::log(2.0), 0.0;
  p = softmax(two);
  CHECK(p[0] == Catch::Approx(2.0 / 3.0).margin(1e-14));
  CHECK(p[1] == Catch::Approx(1.0 / 3.0).margin(1e-14));

  two << 1000.0, 0.0;
  p = softmax(two);
  REQUIRE(p.allFinite());
  CHECK(p[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(p[1] == Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(softmax(Vector{}), std::invalid_argument);
}

TEST_CASE("softmax: sums to one and is shift-invariant for large magnitudes") {
  RandomStream rng(7, "softmax-prop");
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + static_cast<int>(rng.next_below(64));
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x[i] = rng.next_uniform(-1e6, 1e6);
    const Vector p = softmax(x);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK(p.minCoeff() >= 0.0);

    const double shift = rng.next_uniform(-100.0, 100.0);
    const Vector q = softmax(Vector(x.array() + shift));
    CHECK((p - q).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("cross_entropy: analytic values and label validation") {
  // Near one-hot probabilities at the label.
  Vector sharp = Vector::Zero(5);
  sharp[3] = 60.0;
  CHECK(cross_entropy(sharp, 3) == Catch::Approx(0.0).margin(1e-12));

  Vector uniform = Vector::Zero(10000);
  CHECK(cross_entropy(uniform, 1234) == Catch::Approx(std::log(10000.0)).margin(1e-12));

  CHECK_THROWS_AS(cross_entropy(uniform, 10000), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(uniform, -1), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(Vector{}, 0), std::invalid_argument);
}

TEST_CASE("cross_entropy: fused matches the unfused composition") {
  RandomStream rng(11, "ce-prop");
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 2 + static_cast<int>(rng.next_below(63));
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x[i] = rng.next_uniform(-50.0, 50.0);
    const auto label = static_cast<Eigen::Index>(rng.next_below(dim));
    // Unfused oracle: softmax first, then -log of the picked entry.
    const double unfused = -std::log(softmax(x)[label]);
    CHECK(std::abs(cross_entropy(x, label) - unfused) < 1e-9);
  }
}

TEST_CASE("RandomStream: keyed determinism and stream independence") {
  RandomStream a(42, "embedding-init");
  RandomStream b(42, "embedding-init");
  for (int i = 0; i < 64; ++i) REQUIRE(a.next_u64() == b.next_u64());

  RandomStream c(42, "embedding-init");
  RandomStream d(42, "dataset-shuffle");
  bool differ = false;
  for (int i = 0; i < 8; ++i) differ |= (c.next_u64() != d.next_u64());
  CHECK(differ);

  RandomStream e(43, "embedding-init");
  RandomStream f(42, "embedding-init");
  CHECK(e.next_u64() != f.next_u64());

  // Value semantics: advancing a copy leaves the original untouched.
  RandomStream base(1, "x");
  RandomStream copy = base;
  (void)copy.next_u64();
  CHECK(base.next_u64() == RandomStream(1, "x").next_u64());

  CHECK_THROWS_AS(base.next_below(0), std::invalid_argument);
  RandomStream g(5, "bounds");
  for (int i = 0; i < 1000; ++i) CHECK(g.next_below(7) < 7);
}

TEST_CASE("RandomStream: derived streams are reproducible and distinct") {
  RandomStream root(9, "root");
  CHECK(root.derive("a").next_u64() == root.derive("a").next_u64());
  CHECK(root.derive("a").next_u64() != root.derive("b").next_u64());
  CHECK(root.derive("a", 0).next_u64() != root.derive("a", 1).next_u64());
}

TEST_CASE("init_uniform: determinism, bounds, and moments") {
  RandomStream s1(3, "init");
  const Matrix m1 = init_uniform(s1, 13, 7, 0.5);
  const Matrix m2 = init_uniform(RandomStream(3, "init"), 13, 7, 0.5);
  REQUIRE(m1.rows() == 13);
  REQUIRE(m1.cols() == 7);
  CHECK(checksum(m1) == checksum(m2));
  CHECK(m1.cwiseAbs().maxCoeff() <= 0.5);

  const Matrix m3 = init_uniform(RandomStream(3, "other"), 13, 7, 0.5);
  CHECK(checksum(m1) != checksum(m3));

  // Moment oracle: mean within 3 sigma of 0, variance within 5% of scale^2/3.
  const double scale = 0.1;
  const int64_t N = 100000;
  const Matrix big = init_uniform(RandomStream(17, "moments"), 1000, 100, scale);
  const double mean = big.mean();
  const double var = (big.array() - mean).square().sum() / static_cast<double>(N - 1);
  const double mean_sigma = scale / std::sqrt(3.0 * static_cast<double>(N));
  CHECK(std::abs(mean) < 3.0 * mean_sigma);
  CHECK(var == Catch::Approx(scale * scale / 3.0).epsilon(0.05));

  CHECK_THROWS_AS(init_uniform(RandomStream(0, "x"), 0, 3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(init_uniform(RandomStream(0, "x"), 3, -1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(init_uniform(RandomStream(0, "x"), 3, 3, 0.0), std::invalid_argument);
}

TEST_CASE("argmax ties break toward the lowest index") {
  const double ties[5] = {1.0, 3.0, 3.0, 2.0, 3.0};
  CHECK(argmax_lowest(ties, 5) == 1);
}
