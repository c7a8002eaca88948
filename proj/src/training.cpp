#include "moat/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "moat/errors.hpp"
#include "moat/gradients.hpp"
#include "moat/likelihood.hpp"
#include "moat/rng.hpp"

namespace moat {

namespace {

constexpr std::uint64_t kRandomInitStream = 0x5eed;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

// Rows sorted lexicographically, so training depends on the multiset of
// rows and not on file order.
DataMatrix canonical_rows(const DataMatrix& data) {
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = data.row(a);
    const auto rb = data.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  DataMatrix out;
  for (std::size_t i : order) out.append(data.row(i));
  return out;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

}  // namespace

TrainConfig TrainConfig::defaults_for(int num_vars) {
  TrainConfig c;
  if (num_vars >= 500) {
    c.batch_size = 64;
    c.learning_rate = 0.01;
  }
  return c;
}

TrainConfig TrainConfig::parse(std::string_view text) { return parse(text, TrainConfig{}); }

TrainConfig TrainConfig::load(const std::string& path) { return load(path, TrainConfig{}); }

TrainConfig TrainConfig::parse(std::string_view text, TrainConfig base) {
  TrainConfig c = base;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw DataError("config line " + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "batch_size") {
      c.batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "learning_rate" || key == "lr") {
      c.learning_rate = parse_number<double>(key, value);
    } else if (key == "epochs") {
      c.epochs = parse_number<int>(key, value);
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "smoothing") {
      c.smoothing = parse_number<double>(key, value);
    } else if (key == "optimizer") {
      if (value == "sgd") {
        c.optimizer = Optimizer::kSgd;
      } else if (value == "adam") {
        c.optimizer = Optimizer::kAdam;
      } else {
        throw DataError("config line " + std::to_string(line_no) + ": optimizer must be sgd or adam");
      }
    } else {
      throw DataError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), base);
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ShapeError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ShapeError("learning_rate must be positive");
  if (epochs < 0) throw ShapeError("epochs must be nonnegative");
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw ShapeError("smoothing must be nonnegative");
}

std::string TrainConfig::to_string() const {
  std::ostringstream out;
  out.precision(17);
  out << "batch_size=" << batch_size << "\nlearning_rate=" << learning_rate << "\nepochs=" << epochs
      << "\nseed=" << seed << "\nsmoothing=" << smoothing
      << "\noptimizer=" << (optimizer == Optimizer::kSgd ? "sgd" : "adam") << "\n";
  return out.str();
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,train_ll,valid_ll\n";
  out.precision(17);
  for (const auto& r : epochs) out << r.epoch << ',' << r.train_ll << ',' << r.valid_ll << '\n';
}

MarginalTable empirical_marginals(const DataMatrix& data, const VarDomain& domain, double smoothing) {
  if (data.empty()) throw DataError("cannot estimate marginals from empty data");
  check_in_domain(data, domain);
  const int n = domain.size();
  // Pseudo-data: `mass` uniformly distributed rows, with mass = alpha * k_max.
  // Every table then receives alpha * k_max / cells per cell, which keeps
  // pairwise tables consistent with the univariates.
  int k_max = 0;
  for (int k : domain.cards()) k_max = std::max(k_max, k);
  const double mass = smoothing * k_max;
  const double total = static_cast<double>(data.rows()) + mass;

  MarginalTable table(domain);
  for (int v = 0; v < n; ++v) {
    auto p = table.univariate(v);
    std::fill(p.begin(), p.end(), 0.0);
    for (std::size_t i = 0; i < data.rows(); ++i) p[static_cast<std::size_t>(data(i, static_cast<std::size_t>(v)))] += 1.0;
    const double extra = mass / domain.card(v);
    for (double& x : p) x = (x + extra) / total;
  }
  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const int kv = domain.card(v);
    auto cells = table.pair_cells(e);
    std::fill(cells.begin(), cells.end(), 0.0);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      const int a = data(i, static_cast<std::size_t>(u));
      const int b = data(i, static_cast<std::size_t>(v));
      cells[static_cast<std::size_t>(a * kv + b)] += 1.0;
    }
    const double extra = mass / static_cast<double>(cells.size());
    for (double& x : cells) x = (x + extra) / total;
  }
  return table;
}

std::vector<double> mutual_information(const MarginalTable& table) {
  const VarDomain& domain = table.domain();
  std::vector<double> mi(domain.num_pairs(), 0.0);
  for (std::size_t e = 0; e < mi.size(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const int kv = domain.card(v);
    const auto cells = table.pair_cells(e);
    double s = 0.0;
    for (int a = 0; a < domain.card(u); ++a) {
      for (int b = 0; b < kv; ++b) {
        const double p = cells[static_cast<std::size_t>(a * kv + b)];
        if (p > 0.0) s += p * std::log(p / (table.uni(u, a) * table.uni(v, b)));
      }
    }
    mi[e] = std::max(s, 0.0);
  }
  return mi;
}

FreeParams initialize(const DataMatrix& data, const VarDomain& domain, double smoothing) {
  const MarginalTable table = empirical_marginals(data, domain, smoothing);
  std::vector<double> weights = mutual_information(table);
  for (double& w : weights) w += kMutualInformationFloor;
  return invert_marginals(table, domain, weights);
}

FreeParams random_params(const VarDomain& domain, std::uint64_t seed) {
  FreeParams params(domain);
  Rng rng(seed);
  for (double& x : params.values()) x = rng.normal();
  return params;
}

TrainResult train(const DataMatrix& train_data, const DataMatrix& valid_data, const VarDomain& domain,
                  const TrainConfig& config) {
  config.validate();
  return train_from(train_data, valid_data, initialize(train_data, domain, config.smoothing), config);
}

TrainResult train_from(const DataMatrix& train_data, const DataMatrix& valid_data, const FreeParams& init,
                       const TrainConfig& config) {
  config.validate();
  const VarDomain& domain = init.domain();
  if (train_data.empty() || valid_data.empty()) throw DataError("training and validation splits must be nonempty");
  check_in_domain(train_data, domain);
  check_in_domain(valid_data, domain);
  const DataMatrix data = canonical_rows(train_data);

  FreeParams params = init;
  MoatModel model = realize(params, domain);
  TrainResult best{model, params, {}};
  auto record = [&](int epoch) {
    const EpochRecord r{epoch, batch_mean_log_likelihood(model, data), batch_mean_log_likelihood(model, valid_data)};
    if (!std::isfinite(r.train_ll) || !std::isfinite(r.valid_ll)) {
      throw NumericError("non-finite log-likelihood after epoch " + std::to_string(epoch));
    }
    best.history.epochs.push_back(r);
    const auto& chosen = best.history.epochs[static_cast<std::size_t>(best.history.chosen_epoch)];
    if (epoch == 0 || r.valid_ll > chosen.valid_ll) {
      best.history.chosen_epoch = static_cast<int>(best.history.epochs.size() - 1);
      best.model = model;
      best.params = params;
    }
  };
  record(0);

  AdamState adam;
  if (config.optimizer == Optimizer::kAdam) {
    adam.m.assign(params.size(), 0.0);
    adam.v.assign(params.size(), 0.0);
  }
  std::vector<std::size_t> order(data.rows());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const auto where = [&] {
        return "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no) + " (rows " +
               std::to_string(start) + ".." + std::to_string(end - 1) + " of the sorted training set)";
      };
      BatchGradient g;
      try {
        g = batch_gradient(model, params, data, rows);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " in " + where());
      }
      bool finite = std::isfinite(g.mean_log_likelihood);
      for (double d : g.gradient.values()) finite = finite && std::isfinite(d);
      if (!finite) throw NumericError("non-finite loss or gradient in " + where());
      auto theta = params.values();
      const auto grad = g.gradient.values();
      if (config.optimizer == Optimizer::kSgd) {
        for (std::size_t j = 0; j < theta.size(); ++j) theta[j] += config.learning_rate * grad[j];
      } else {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++adam.step;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
        for (std::size_t j = 0; j < theta.size(); ++j) {
          adam.m[j] = b1 * adam.m[j] + (1 - b1) * grad[j];
          adam.v[j] = b2 * adam.v[j] + (1 - b2) * grad[j] * grad[j];
          theta[j] += config.learning_rate * (adam.m[j] / c1) / (std::sqrt(adam.v[j] / c2) + eps);
        }
      }
      try {
        model = realize(params, domain);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " after the update in " + where());
      }
    }
    record(epoch);
  }
  return best;
}

void AblationResult::write_csv(std::ostream& out) const {
  out << "init,run,seed,epoch,train_ll,valid_ll\n";
  out.precision(17);
  auto emit = [&](const char* name, const std::vector<TrainHistory>& runs) {
    for (std::size_t r = 0; r < runs.size(); ++r)
      for (const auto& e : runs[r].epochs)
        out << name << ',' << r << ',' << seeds[r] << ',' << e.epoch << ',' << e.train_ll << ',' << e.valid_ll << '\n';
  };
  emit("deterministic", deterministic);
  emit("random", random);
}

AblationResult ablation_compare(const DataMatrix& train_data, const DataMatrix& valid_data, const VarDomain& domain,
                                const TrainConfig& config, int runs) {
  if (runs < 1) throw ShapeError("ablation needs at least one run");
  AblationResult out;
  const FreeParams det_init = initialize(train_data, domain, config.smoothing);
  for (int r = 0; r < runs; ++r) {
    TrainConfig c = config;
    c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    out.seeds.push_back(c.seed);
    out.deterministic.push_back(train_from(train_data, valid_data, det_init, c).history);
    const FreeParams rand_init = random_params(domain, derive_seed(c.seed, kRandomInitStream));
    out.random.push_back(train_from(train_data, valid_data, rand_init, c).history);
  }
  return out;
}

}  // namespace moat
