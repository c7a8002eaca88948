#include <doctest.h>

#include <cmath>

#include "moat/errors.hpp"
#include "moat/likelihood.hpp"
#include "moat/linalg.hpp"
#include "moat/oracle.hpp"
#include "moat/parallel.hpp"
#include "support.hpp"

using namespace moat;
using namespace testing_support;

TEST_CASE("signed log-det tracks sign and magnitude") {
  Matrix m(2, 2);
  m << 0, 2, 3, 0;
  const auto d = signed_log_det(m);
  CHECK(d.sign == -1);
  CHECK(d.log_abs == doctest::Approx(std::log(6.0)));
  Matrix s = Matrix::Zero(2, 2);
  CHECK(signed_log_det(s).sign == 0);
}

TEST_CASE("Cayley counts") {
  for (int n = 3; n <= 8; ++n) {
    const std::vector<double> w(pair_count(n), 1.0);
    CHECK(log_partition(n, w) == doctest::Approx((n - 2) * std::log(n)).epsilon(1e-12));
  }
  CHECK(log_partition(5, std::vector<double>(10, 1.0)) == doctest::Approx(std::log(125.0)));
}

TEST_CASE("worked example partition and likelihood") {
  const MoatModel m = fig1_model();
  CHECK(validate(m).empty());
  CHECK(std::exp(log_partition(m)) == doctest::Approx(36.0).epsilon(1e-12));
  const Assignment x{1, 0, 1};
  CHECK(std::exp(log_likelihood(m, x)) == doctest::Approx(fig1_likelihood_101()).epsilon(1e-12));
  CHECK(fig1_likelihood_101() == doctest::Approx(0.151270).epsilon(1e-5));
  CHECK(oracle::brute_likelihood(m, x) == doctest::Approx(fig1_likelihood_101()).epsilon(1e-12));
}

TEST_CASE("partition function matches enumeration on K_6") {
  Rng rng(2);
  std::vector<double> w(pair_count(6));
  for (double& x : w) x = std::exp(rng.normal());
  CHECK(oracle::enumerate_spanning_trees(6, w).size() == 1296);
  CHECK(log_partition(6, w) == doctest::Approx(oracle::enumerated_log_partition(6, w)).epsilon(1e-12));
}

TEST_CASE("disconnected weights give log Z = -inf") {
  std::vector<double> w(pair_count(4), 0.0);
  w[pair_index(4, 0, 1)] = 1;
  w[pair_index(4, 2, 3)] = 1;
  CHECK(std::isinf(log_partition(4, w)));
  CHECK(log_partition(4, w) < 0);
}

TEST_CASE("independence tables ignore the weights") {
  Rng rng(4);
  const VarDomain d({2, 3, 2, 4});
  FreeParams p = oracle::random_free_params(d, rng);
  MoatModel m = realize(p, d);
  for (std::size_t e = 0; e < d.num_pairs(); ++e) {
    const auto [u, v] = d.pair_vertices(e);
    for (int a = 0; a < d.card(u); ++a)
      for (int b = 0; b < d.card(v); ++b) m.table.set_pair(u, v, a, b, m.table.uni(u, a) * m.table.uni(v, b));
  }
  Assignment x(4, 0);
  do {
    double expect = 0;
    for (int v = 0; v < 4; ++v) expect += std::log(m.table.uni(v, x[static_cast<std::size_t>(v)]));
    CHECK(log_likelihood(m, x) == doctest::Approx(expect).epsilon(1e-12));
  } while (next_assignment(x, d));
}

TEST_CASE("two variables reduce to the pair table") {
  Rng rng(6);
  const VarDomain d({3, 2});
  const MoatModel m = oracle::random_model(d, rng);
  Assignment x(2, 0);
  do {
    CHECK(std::exp(log_likelihood(m, x)) == doctest::Approx(m.table.pair(0, 1, x[0], x[1])).epsilon(1e-12));
  } while (next_assignment(x, d));
}

TEST_CASE("normalization over small domains") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const VarDomain d = trial % 2 ? random_domain(4, 3, rng) : VarDomain::binary(6);
    const MoatModel m = oracle::random_model(d, rng);
    const double log_z = log_partition(m);
    double total = 0;
    Assignment x(static_cast<std::size_t>(d.size()), 0);
    do {
      total += std::exp(log_likelihood(m, x, log_z));
    } while (next_assignment(x, d));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("weight scaling leaves the likelihood unchanged") {
  Rng rng(10);
  const VarDomain d = VarDomain::binary(5);
  MoatModel m = oracle::random_model(d, rng);
  const Assignment x = random_assignment(d, rng);
  const double before = log_likelihood(m, x);
  for (double& w : m.weights) w *= 7.5;
  CHECK(log_likelihood(m, x) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("zero univariate cell gives -inf, out-of-domain throws") {
  const VarDomain d = VarDomain::binary(2);
  MarginalTable t(d);
  t.univariate(0)[0] = 1.0;
  t.univariate(0)[1] = 0.0;
  t.univariate(1)[0] = t.univariate(1)[1] = 0.5;
  t.set_pair(0, 1, 0, 0, 0.5);
  t.set_pair(0, 1, 0, 1, 0.5);
  const MoatModel m(d, {1.0}, t);
  const Assignment x{1, 0};
  CHECK(std::isinf(log_likelihood(m, x)));
  const Assignment bad{2, 0};
  CHECK_THROWS_AS(log_likelihood(m, bad), DataError);
}

TEST_CASE("NaN in the table is an error") {
  const VarDomain d = VarDomain::binary(2);
  MoatModel m = realize(FreeParams(d), d);
  m.table.univariate(0)[0] = std::nan("");
  const Assignment x{0, 0};
  CHECK_THROWS_AS(log_likelihood(m, x), NumericError);
}

TEST_CASE("batch mean over one and duplicated rows") {
  Rng rng(12);
  const VarDomain d = VarDomain::binary(4);
  const MoatModel m = oracle::random_model(d, rng);
  const Assignment x = random_assignment(d, rng);
  DataMatrix one;
  one.append(x);
  DataMatrix two = one;
  two.append(x);
  CHECK(batch_mean_log_likelihood(m, one) == doctest::Approx(log_likelihood(m, x)).epsilon(1e-14));
  CHECK(batch_mean_log_likelihood(m, two) == doctest::Approx(log_likelihood(m, x)).epsilon(1e-14));
}

TEST_CASE("batch results do not depend on the thread count") {
  Rng rng(14);
  const VarDomain d = VarDomain::binary(8);
  const MoatModel m = oracle::random_model(d, rng);
  DataMatrix data;
  for (int i = 0; i < 500; ++i) data.append(random_assignment(d, rng));
  set_num_threads(1);
  const auto a = log_likelihoods(m, data);
  const double ma = batch_mean_log_likelihood(m, data);
  set_num_threads(4);
  const auto b = log_likelihoods(m, data);
  const double mb = batch_mean_log_likelihood(m, data);
  set_num_threads(0);
  CHECK(a == b);
  CHECK(ma == mb);
}

TEST_CASE("raw evaluation of a valid model matches the likelihood") {
  Rng rng(15);
  const VarDomain d = VarDomain::binary(4);
  const MoatModel m = oracle::random_model(d, rng);
  const RawMoat raw{m.domain, m.weights, m.table};
  const Assignment x = random_assignment(d, rng);
  CHECK(raw_evaluate(raw, x) == doctest::Approx(std::exp(log_likelihood(m, x))).epsilon(1e-12));
  CHECK(raw_semiring_sum(raw, Evidence(4)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(raw_semiring_sum(raw, Evidence::full(d, x)) == doctest::Approx(raw_evaluate(raw, x)).epsilon(1e-14));
}

TEST_CASE("semiring sum refuses too many free variables") {
  const VarDomain d = VarDomain::binary(21);
  const MoatModel m = realize(FreeParams(d), d);
  const RawMoat raw{m.domain, m.weights, m.table};
  CHECK_THROWS_AS(raw_semiring_sum(raw, Evidence(21)), CapacityError);
}

TEST_CASE("leaf gadget on the path 0-1-2 with ends marked") {
  const auto g = oracle::Graph::path(3);
  const auto gadget = oracle::leafcount_gadget(g, 1e-4);
  const std::vector<int> ends{0, 2};
  // One spanning tree, whose leaves are {0, 2}.
  CHECK(std::abs(oracle::leaf_superset_score(gadget, ends) - 1.0) < 0.5);
  const std::vector<int> odd{0};
  CHECK(raw_evaluate(gadget.raw, oracle::indicator_assignment(3, odd)) < 0);
}
