#include <doctest.h>

#include <cmath>
#include <sstream>

#include "moat/errors.hpp"
#include "moat/gradients.hpp"
#include "moat/likelihood.hpp"
#include "moat/training.hpp"
#include "moat/st_sampler.hpp"
#include "moat/tree.hpp"
#include "support.hpp"

using namespace moat;
using namespace testing_support;

namespace {

DataMatrix sample_rows(const MoatModel& m, std::size_t rows, Rng& rng) {
  const TreeSampler sampler(m.domain.size(), m.weights);
  DataMatrix out;
  for (std::size_t i = 0; i < rows; ++i) out.append(tree_conditional_sample(sampler(rng), m.table, Evidence(m.domain.size()), rng));
  return out;
}

double reference_mi(const MarginalTable& t, int u, int v) {
  double mi = 0;
  for (int a = 0; a < t.domain().card(u); ++a)
    for (int b = 0; b < t.domain().card(v); ++b) {
      const double p = t.pair(u, v, a, b);
      if (p > 0) mi += p * std::log(p / (t.uni(u, a) * t.uni(v, b)));
    }
  return mi;
}

}  // namespace

TEST_CASE("smoothed empirical marginals") {
  const VarDomain d({2, 3});
  DataMatrix data;
  data.append(std::vector<int>{0, 2});
  data.append(std::vector<int>{1, 2});
  data.append(std::vector<int>{1, 0});
  const MarginalTable raw = empirical_marginals(data, d, 0.0);
  CHECK(raw.uni(0, 1) == doctest::Approx(2.0 / 3));
  CHECK(raw.uni(1, 1) == 0.0);
  CHECK(raw.pair(0, 1, 1, 2) == doctest::Approx(1.0 / 3));
  const MarginalTable s = empirical_marginals(data, d, 1.0);
  CHECK(validate(s).empty());
  for (int v = 0; v < 2; ++v)
    for (int a = 0; a < d.card(v); ++a) CHECK(s.uni(v, a) > 0.0);
  // Binary column with alpha = 1: (count + 1) / (N + 2).
  DataMatrix bin;
  bin.append(std::vector<int>{0, 1});
  bin.append(std::vector<int>{1, 1});
  bin.append(std::vector<int>{1, 0});
  const MarginalTable b = empirical_marginals(bin, VarDomain::binary(2), 1.0);
  CHECK(b.uni(0, 1) == doctest::Approx(3.0 / 5));
  CHECK(b.pair(0, 1, 1, 1) == doctest::Approx(1.5 / 5));
  CHECK_THROWS_AS(empirical_marginals(DataMatrix(), d, 1.0), DataError);
}

TEST_CASE("mutual information examples") {
  DataMatrix same;
  for (int i = 0; i < 500; ++i) {
    same.append(std::vector<int>{0, 0});
    same.append(std::vector<int>{1, 1});
  }
  const VarDomain d = VarDomain::binary(2);
  const FreeParams p = initialize(same, d, 0.0);
  CHECK(mutual_information(empirical_marginals(same, d, 0.0))[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(p.edge_logits()[0] == doctest::Approx(std::log(std::log(2.0) + 1e-3)).epsilon(1e-12));

  Rng rng(1);
  DataMatrix indep;
  for (int i = 0; i < 200000; ++i) indep.append(std::vector<int>{static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))});
  const FreeParams q = initialize(indep, d, 1.0);
  CHECK(std::abs(q.edge_logits()[0] - std::log(1e-3)) < 0.05);

  Rng mr(2);
  const VarDomain cd({3, 2, 4});
  const MoatModel m = oracle::random_model(cd, mr);
  const auto mi = mutual_information(m.table);
  for (std::size_t e = 0; e < cd.num_pairs(); ++e) {
    const auto [u, v] = cd.pair_vertices(e);
    CHECK(mi[e] == doctest::Approx(reference_mi(m.table, u, v)).epsilon(1e-12));
    CHECK(mi[e] >= 0.0);
  }
}

TEST_CASE("initialization is deterministic and reproduces the smoothed marginals") {
  Rng rng(3);
  for (int cat = 0; cat < 2; ++cat) {
    const VarDomain d = cat ? random_domain(5, 3, rng) : VarDomain::binary(6);
    const MoatModel gen = oracle::random_model(d, rng);
    const DataMatrix data = sample_rows(gen, 800, rng);
    const FreeParams a = initialize(data, d, 1.0);
    const FreeParams b = initialize(data, d, 1.0);
    CHECK(a == b);
    const MarginalTable want = empirical_marginals(data, d, 1.0);
    const MarginalTable got = realize_table(a);
    CHECK(validate(got).empty());
    for (int v = 0; v < d.size(); ++v)
      for (int k = 0; k < d.card(v); ++k) CHECK(got.uni(v, k) == doctest::Approx(want.uni(v, k)).epsilon(1e-8));
    // Categorical pairs are only reachable inside the chain family.
    if (cat) continue;
    for (std::size_t e = 0; e < d.num_pairs(); ++e)
      for (std::size_t c = 0; c < want.pair_cells(e).size(); ++c)
        CHECK(std::abs(got.pair_cells(e)[c] - want.pair_cells(e)[c]) < 1e-8);
  }
}

TEST_CASE("zero epochs return the initial model") {
  Rng rng(4);
  const VarDomain d = VarDomain::binary(4);
  const MoatModel gen = oracle::random_model(d, rng);
  const DataMatrix train_rows = sample_rows(gen, 300, rng), valid_rows = sample_rows(gen, 100, rng);
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainResult r = train(train_rows, valid_rows, d, cfg);
  CHECK(r.params == initialize(train_rows, d, cfg.smoothing));
  REQUIRE(r.history.epochs.size() == 1);
  CHECK(r.history.chosen_epoch == 0);
  CHECK(r.history.epochs[0].valid_ll == doctest::Approx(batch_mean_log_likelihood(r.model, valid_rows)).epsilon(1e-14));
}

TEST_CASE("training is reproducible and ignores row order") {
  Rng rng(5);
  const VarDomain d = VarDomain::binary(5);
  const MoatModel gen = oracle::random_model(d, rng);
  const DataMatrix train_rows = sample_rows(gen, 600, rng), valid_rows = sample_rows(gen, 200, rng);
  DataMatrix reversed;
  for (std::size_t i = train_rows.rows(); i-- > 0;) reversed.append(train_rows.row(i));
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 64;
  cfg.seed = 17;
  const TrainResult a = train(train_rows, valid_rows, d, cfg);
  const TrainResult b = train(train_rows, valid_rows, d, cfg);
  const TrainResult c = train(reversed, valid_rows, d, cfg);
  CHECK(a.params == b.params);
  CHECK(a.params == c.params);
  cfg.seed = 18;
  const TrainResult e = train(train_rows, valid_rows, d, cfg);
  CHECK_FALSE(a.params == e.params);
}

TEST_CASE("chosen epoch maximizes validation likelihood") {
  Rng rng(6);
  const VarDomain d = VarDomain::binary(6);
  const MoatModel gen = oracle::random_model(d, rng);
  const DataMatrix train_rows = sample_rows(gen, 200, rng), valid_rows = sample_rows(gen, 200, rng);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.2;
  const TrainResult r = train(train_rows, valid_rows, d, cfg);
  REQUIRE(r.history.epochs.size() == 16);
  double best = -INFINITY;
  for (const auto& e : r.history.epochs) best = std::max(best, e.valid_ll);
  CHECK(r.history.epochs[static_cast<std::size_t>(r.history.chosen_epoch)].valid_ll == best);
  CHECK(batch_mean_log_likelihood(r.model, valid_rows) == doctest::Approx(best).epsilon(1e-13));
  std::ostringstream csv;
  r.history.write_csv(csv);
  CHECK(csv.str().rfind("epoch,train_ll,valid_ll\n0,", 0) == 0);
}

TEST_CASE("a small step along the gradient does not lower the batch likelihood") {
  Rng rng(7);
  int checked = 0;
  for (int t = 0; t < 50; ++t) {
    const VarDomain d = t % 2 ? VarDomain::binary(3 + static_cast<int>(rng.below(5))) : random_domain(4, 3, rng);
    const FreeParams p = smooth_random_params(d, rng);
    const MoatModel m = realize(p, d);
    DataMatrix batch;
    for (int i = 0; i < 32; ++i) batch.append(random_assignment(d, rng));
    const double before = batch_mean_log_likelihood(m, batch);
    const Gradient g = grad_batch(m, p, batch);
    for (double lr : {1e-4, 1e-5}) {
      FreeParams q = p;
      for (std::size_t i = 0; i < q.size(); ++i) q[i] += lr * g[i];
      CHECK(batch_mean_log_likelihood(realize(q, d), batch) >= before);
    }
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = batch.rows();
    cfg.learning_rate = 1e-4;
    const TrainResult r = train_from(batch, batch, p, cfg);
    CHECK(r.history.epochs[1].train_ll >= r.history.epochs[0].train_ll);
    ++checked;
  }
  CHECK(checked == 50);
}

TEST_CASE("data from a single tree is fitted to within 0.02 nats") {
  Rng rng(8);
  const VarDomain d = VarDomain::binary(5);
  MoatModel gen = oracle::random_model(d, rng, 3.0);
  const SpanningTree tree(5, {{0, 1}, {1, 2}, {1, 3}, {3, 4}});
  std::fill(gen.weights.begin(), gen.weights.end(), 0.0);
  for (std::size_t e : tree.pair_indices()) gen.weights[e] = 1.0;
  const DataMatrix train_rows = sample_rows(gen, 20000, rng);
  const DataMatrix valid_rows = sample_rows(gen, 5000, rng);
  const double truth = batch_mean_log_likelihood(gen, valid_rows);
  TrainConfig cfg;
  cfg.batch_size = 128;
  const TrainResult r = train(train_rows, valid_rows, d, cfg);
  const double fitted = r.history.epochs[static_cast<std::size_t>(r.history.chosen_epoch)].valid_ll;
  MESSAGE("generator " << truth << " trained " << fitted << " after epoch " << r.history.chosen_epoch);
  CHECK(std::abs(fitted - truth) <= 0.02);
}

TEST_CASE("non-finite updates abort naming the batch") {
  const VarDomain d = VarDomain::binary(3);
  DataMatrix rows;
  for (int i = 0; i < 8; ++i) rows.append(std::vector<int>{i & 1, (i >> 1) & 1, (i >> 2) & 1});
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 2;
  cfg.learning_rate = 1e300;
  Rng rng(9);
  const FreeParams p = smooth_random_params(d, rng);
  try {
    train_from(rows, rows, p, cfg);
    FAIL("expected an abort");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("batch") != std::string::npos);
    MESSAGE(msg);
  }
}

TEST_CASE("config parsing") {
  const TrainConfig c = TrainConfig::parse("# comment\nbatch_size = 32\nlearning_rate=0.5\nepochs=3\nseed=9\n"
                                           "smoothing=0.25\noptimizer=adam\n");
  CHECK(c.batch_size == 32);
  CHECK(c.learning_rate == 0.5);
  CHECK(c.epochs == 3);
  CHECK(c.seed == 9);
  CHECK(c.smoothing == 0.25);
  CHECK(c.optimizer == Optimizer::kAdam);
  CHECK(TrainConfig::parse(c.to_string()).to_string() == c.to_string());
  CHECK_THROWS_AS(TrainConfig::parse("bogus=1"), DataError);
  CHECK_THROWS_AS(TrainConfig::parse("epochs"), DataError);
  CHECK_THROWS_AS(TrainConfig::parse("epochs=abc"), DataError);
  CHECK_THROWS_AS(TrainConfig::parse("batch_size=0").validate(), ShapeError);
  CHECK(TrainConfig::defaults_for(16).batch_size == 1024);
  CHECK(TrainConfig::defaults_for(16).learning_rate == 0.05);
  CHECK(TrainConfig::defaults_for(1556).batch_size == 64);
}

TEST_CASE("ablation with zero epochs") {
  Rng rng(10);
  const VarDomain d = VarDomain::binary(4);
  const MoatModel gen = oracle::random_model(d, rng);
  const DataMatrix train_rows = sample_rows(gen, 300, rng), valid_rows = sample_rows(gen, 100, rng);
  TrainConfig cfg;
  cfg.epochs = 0;
  const AblationResult r = ablation_compare(train_rows, valid_rows, d, cfg, 1);
  REQUIRE(r.deterministic.size() == 1);
  REQUIRE(r.random.size() == 1);
  CHECK(r.deterministic[0].epochs.size() == 1);
  CHECK(r.random[0].epochs.size() == 1);
  const MoatModel init = realize(initialize(train_rows, d, cfg.smoothing), d);
  CHECK(r.deterministic[0].epochs[0].valid_ll == doctest::Approx(batch_mean_log_likelihood(init, valid_rows)).epsilon(1e-14));
  std::ostringstream csv;
  r.write_csv(csv);
  CHECK(csv.str().rfind("init,run,seed,epoch,train_ll,valid_ll\n", 0) == 0);
  CHECK_THROWS_AS(ablation_compare(train_rows, valid_rows, d, cfg, 0), ShapeError);
}

TEST_CASE("random parameters are standard normal draws") {
  Rng rng(11);
  const VarDomain d = random_domain(8, 4, rng);
  const FreeParams a = random_params(d, 5), b = random_params(d, 5);
  CHECK(a == b);
  double sum = 0, sq = 0;
  for (double x : a.values()) {
    sum += x;
    sq += x * x;
  }
  const double n = static_cast<double>(a.size());
  CHECK(std::abs(sum / n) < 4 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1) < 0.3);
}
