// Command-line front end: training, evaluation, sampling, posterior
// inference, convergence and ablation experiments, oracle self-check.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moat/data.hpp"
#include "moat/errors.hpp"
#include "moat/inference.hpp"
#include "moat/likelihood.hpp"
#include "moat/oracle.hpp"
#include "moat/parallel.hpp"
#include "moat/serialize.hpp"
#include "moat/st_sampler.hpp"
#include "moat/training.hpp"

namespace fs = std::filesystem;
using namespace moat;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string data_dir;
  std::string dataset = "nltcs";
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  double lr = 0.0;
  int epochs = -1;
  std::string config_file;
  std::string optimizer;
  double smoothing = -1.0;
  std::string evidence;
  std::size_t samples = 1000;
  std::size_t burn_in = 1000;
  std::string method = "collapsed";
  std::string out;
  std::string hist_out;
  std::string model;
  std::string data_file;
  int threads = 0;
  int runs = 5;
  int models = 200;
  int max_n = 6;
  std::string evidence_sizes = "2,4,8";
  std::string counts = "10,100,1000,10000";
  std::string methods = "is,collapsed,gibbs";
  int seeds = 5;
};

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(item, &pos);
    if (pos != item.size()) throw CLI::ValidationError("list", "bad entry '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string data_root(const Options& o) {
  if (!o.data_dir.empty()) return o.data_dir;
  if (const char* env = std::getenv("MOAT_DATA_DIR")) return env;
  return "data";
}

struct Splits {
  DatasetFiles files;
  DataMatrix train;
  DataMatrix valid;
  DataMatrix test;
  VarDomain domain;
};

Splits load_splits(const Options& o) {
  const std::string root = data_root(o);
  const auto files = locate_dataset(root, o.dataset);
  if (!files) throw DataError("dataset '" + o.dataset + "' not found under " + root);
  Splits s{*files, load_dataset(files->train, Split::kTrain).data, load_dataset(files->valid, Split::kValid).data,
           load_dataset(files->test, Split::kTest).data, {}};
  const DataMatrix* all[] = {&s.train, &s.valid, &s.test};
  s.domain = infer_domain(all);
  return s;
}

TrainConfig make_config(const Options& o, int num_vars) {
  TrainConfig c = TrainConfig::defaults_for(num_vars);
  if (!o.config_file.empty()) c = TrainConfig::load(o.config_file, c);
  if (o.batch_size > 0) c.batch_size = o.batch_size;
  if (o.lr > 0.0) c.learning_rate = o.lr;
  if (o.epochs >= 0) c.epochs = o.epochs;
  if (o.smoothing >= 0.0) c.smoothing = o.smoothing;
  if (o.optimizer == "adam") c.optimizer = Optimizer::kAdam;
  if (o.optimizer == "sgd") c.optimizer = Optimizer::kSgd;
  c.seed = o.seed;
  c.validate();
  return c;
}

std::map<std::string, std::string> config_map(const TrainConfig& c) {
  std::map<std::string, std::string> m;
  std::stringstream ss(c.to_string());
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

// Output file when --out is set, stdout otherwise. Files carry full
// precision, the terminal 6 significant digits.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw DataError("cannot write " + path);
      file_ << std::setprecision(17);
    } else {
      std::cout << std::setprecision(6);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

MoatModel require_model(const Options& o) {
  if (o.model.empty()) throw CLI::RequiredError("--model");
  return load_model(o.model).model;
}

int cmd_train(const Options& o) {
  const Splits s = load_splits(o);
  const TrainConfig config = make_config(o, s.domain.size());
  const TrainResult result = train(s.train, s.valid, s.domain, config);
  const fs::path out_dir = o.out.empty() ? fs::path("run") : fs::path(o.out);
  fs::create_directories(out_dir);
  const std::string model_path = (out_dir / "model.json").string();
  const std::string history_path = (out_dir / "history.csv").string();
  save_model(model_path, result.model, &result.params);
  {
    std::ofstream h(history_path);
    result.history.write_csv(h);
  }
  RunManifest manifest{"train", config_map(config), o.seed, {s.files.train, s.files.valid, s.files.test},
                       {model_path, history_path}};
  manifest.write((out_dir / "manifest.json").string());
  const auto& chosen = result.history.epochs[static_cast<std::size_t>(result.history.chosen_epoch)];
  std::cout << std::setprecision(6) << "chosen_epoch=" << chosen.epoch << " valid_ll=" << chosen.valid_ll
            << " test_ll=" << batch_mean_log_likelihood(result.model, s.test) << "\n";
  return 0;
}

DataMatrix eval_rows(const Options& o) {
  if (!o.data_file.empty()) return load_dataset(o.data_file, Split::kTest).data;
  return load_splits(o).test;
}

int cmd_eval(const Options& o) {
  const MoatModel model = require_model(o);
  const DataMatrix rows = eval_rows(o);
  std::cout << std::fixed << std::setprecision(4) << batch_mean_log_likelihood(model, rows) << "\n";
  return 0;
}

int cmd_loglik(const Options& o) {
  const MoatModel model = require_model(o);
  const DataMatrix rows = eval_rows(o);
  const auto ll = log_likelihoods(model, rows);
  Sink sink(o.out);
  sink.stream() << "row,log_likelihood\n";
  for (std::size_t i = 0; i < ll.size(); ++i) sink.stream() << i << ',' << ll[i] << '\n';
  return 0;
}

int cmd_sample(const Options& o) {
  const MoatModel model = require_model(o);
  Rng rng(o.seed);
  const TreeSampler sampler(model.domain.size(), model.weights);
  const Evidence none(model.domain.size());
  Sink sink(o.out);
  for (std::size_t m = 0; m < o.samples; ++m) {
    const SpanningTree tree = sampler(rng);
    const Assignment x = tree_conditional_sample(tree, model.table, none, rng);
    for (std::size_t j = 0; j < x.size(); ++j) sink.stream() << (j ? "," : "") << x[j];
    sink.stream() << '\n';
  }
  return 0;
}

Method require_method(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) throw CLI::ValidationError("--method", "must be is, collapsed or gibbs");
  return *m;
}

int cmd_infer(const Options& o) {
  const MoatModel model = require_model(o);
  const Evidence evidence = Evidence::parse(model.domain, o.evidence);
  const Method method = require_method(o.method);
  Rng rng(derive_seed(o.seed, 0));
  PosteriorEstimate est;
  std::vector<double> log_w;
  switch (method) {
    case Method::kIs: {
      const auto samples = importance_sample(model, evidence, o.samples, rng);
      for (const auto& s : samples) log_w.push_back(s.log_weight);
      est = estimate_marginals_is(model.domain, evidence, samples);
      break;
    }
    case Method::kCollapsed: est = estimate_marginals_collapsed(model, evidence, o.samples, rng); break;
    case Method::kGibbs: {
      const auto chain = gibbs_sample(model, evidence, o.samples, o.burn_in, rng);
      est = estimate_marginals_empirical(model.domain, evidence, chain);
      break;
    }
  }
  Sink sink(o.out);
  sink.stream() << "variable,value,probability\n";
  for (std::size_t j = 0; j < est.variables.size(); ++j)
    for (std::size_t a = 0; a < est.probabilities[j].size(); ++a)
      sink.stream() << est.variables[j] << ',' << a << ',' << est.probabilities[j][a] << '\n';
  std::cerr << std::setprecision(6) << "samples=" << est.sample_count << " ess=" << est.ess << "\n";
  if (!o.hist_out.empty()) {
    if (log_w.empty()) throw CLI::ValidationError("--hist-out", "needs --method is");
    // Weights divided by their mean; bins of width 0.1 on [0, 5) plus overflow.
    std::vector<double> w = log_w;
    double top = -std::numeric_limits<double>::infinity();
    for (double lw : w) top = std::max(top, lw);
    double mean = 0.0;
    for (double& x : w) mean += (x = std::exp(x - top));
    mean /= static_cast<double>(w.size());
    constexpr int kBins = 50;
    std::vector<std::size_t> bins(kBins + 1, 0);
    for (double x : w) bins[static_cast<std::size_t>(std::min<double>(kBins, std::floor(x / mean / 0.1)))]++;
    std::ofstream h(o.hist_out);
    if (!h) throw DataError("cannot write " + o.hist_out);
    h << "bin_lo,bin_hi,count\n";
    for (int b = 0; b <= kBins; ++b) {
      h << 0.1 * b << ',';
      if (b == kBins) {
        h << "inf";
      } else {
        h << 0.1 * (b + 1);
      }
      h << ',' << bins[static_cast<std::size_t>(b)] << '\n';
    }
  }
  return 0;
}

int cmd_converge(const Options& o) {
  const MoatModel model = require_model(o);
  std::vector<std::size_t> counts = parse_list(o.counts);
  std::sort(counts.begin(), counts.end());
  std::vector<Method> methods;
  for (const auto& m : split_words(o.methods)) methods.push_back(require_method(m));
  std::vector<std::size_t> sizes;
  DataMatrix rows;
  const bool fixed = !o.evidence.empty();
  if (fixed) {
    sizes.push_back(Evidence::parse(model.domain, o.evidence).num_observed());
  } else {
    sizes = parse_list(o.evidence_sizes);
    rows = eval_rows(o);
  }
  Sink sink(o.out);
  sink.stream() << "method,evidence_size,seed,sample_count,mean_kl\n";
  for (std::size_t size : sizes) {
    for (int s = 0; s < o.seeds; ++s) {
      const std::uint64_t seed = derive_seed(o.seed, static_cast<std::uint64_t>(s));
      Rng ev_rng(derive_seed(seed, size));
      const Evidence evidence = fixed ? Evidence::parse(model.domain, o.evidence)
                                      : random_evidence(model.domain, rows, static_cast<int>(size), ev_rng);
      const PosteriorEstimate exact = exact_posterior(model, evidence);
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        Rng rng(derive_seed(seed, (static_cast<std::uint64_t>(mi) << 32) | size));
        const auto kl = kl_curve(model, evidence, exact, methods[mi], counts, o.burn_in, rng);
        for (std::size_t c = 0; c < counts.size(); ++c)
          sink.stream() << method_name(methods[mi]) << ',' << size << ',' << seed << ',' << counts[c] << ',' << kl[c]
                        << '\n';
      }
    }
  }
  return 0;
}

int cmd_ablate(const Options& o) {
  const Splits s = load_splits(o);
  const TrainConfig config = make_config(o, s.domain.size());
  const AblationResult result = ablation_compare(s.train, s.valid, s.domain, config, o.runs);
  Sink sink(o.out);
  result.write_csv(sink.stream());
  return 0;
}

int cmd_oracle_check(const Options& o) {
  const auto report = oracle::run_equivalence_suite(o.seed, o.models, o.max_n, std::cerr);
  std::cout << "checks=" << report.checks << " failures=" << report.failures << "\n";
  return report.failures == 0 ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-of-all-trees density estimation"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto data_opts = [&](CLI::App* c) {
    c->add_option("--data-dir", o.data_dir, "Dataset root (default $MOAT_DATA_DIR)");
    c->add_option("--dataset", o.dataset, "Dataset name");
  };
  auto train_opts = [&](CLI::App* c) {
    c->add_option("--batch-size", o.batch_size, "Minibatch size");
    c->add_option("--lr", o.lr, "Learning rate");
    c->add_option("--epochs", o.epochs, "Epoch budget");
    c->add_option("--config", o.config_file, "key=value training config file");
    c->add_option("--optimizer", o.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
    c->add_option("--smoothing", o.smoothing, "Smoothing pseudocount");
  };
  auto seed_opt = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed"); };

  auto* train_cmd = app.add_subcommand("train", "Initialize and train a model");
  data_opts(train_cmd);
  train_opts(train_cmd);
  seed_opt(train_cmd);
  train_cmd->add_option("--out", o.out, "Output directory");

  auto* eval_cmd = app.add_subcommand("eval", "Mean test log-likelihood");
  data_opts(eval_cmd);
  eval_cmd->add_option("--model", o.model)->required();
  eval_cmd->add_option("--data", o.data_file, "Data file instead of the test split");

  auto* loglik_cmd = app.add_subcommand("loglik", "Per-row log-likelihoods");
  data_opts(loglik_cmd);
  loglik_cmd->add_option("--model", o.model)->required();
  loglik_cmd->add_option("--data", o.data_file, "Data file instead of the test split");
  loglik_cmd->add_option("--out", o.out);

  auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a model");
  sample_cmd->add_option("--model", o.model)->required();
  sample_cmd->add_option("--samples", o.samples);
  sample_cmd->add_option("--out", o.out);
  seed_opt(sample_cmd);

  auto* infer_cmd = app.add_subcommand("infer", "Posterior marginals given evidence");
  infer_cmd->add_option("--model", o.model)->required();
  infer_cmd->add_option("--evidence", o.evidence, "var=value,...");
  infer_cmd->add_option("--method", o.method)->check(CLI::IsMember({"is", "collapsed", "gibbs"}));
  infer_cmd->add_option("--samples", o.samples);
  infer_cmd->add_option("--burn-in", o.burn_in);
  infer_cmd->add_option("--out", o.out);
  infer_cmd->add_option("--hist-out", o.hist_out, "Histogram CSV of mean-normalized weights (is only)");
  seed_opt(infer_cmd);

  auto* converge_cmd = app.add_subcommand("converge", "KL to the exact posterior against sample count");
  data_opts(converge_cmd);
  converge_cmd->add_option("--model", o.model)->required();
  converge_cmd->add_option("--evidence", o.evidence, "Fixed evidence instead of random test-row evidence");
  converge_cmd->add_option("--evidence-sizes", o.evidence_sizes);
  converge_cmd->add_option("--counts", o.counts);
  converge_cmd->add_option("--methods", o.methods);
  converge_cmd->add_option("--seeds", o.seeds);
  converge_cmd->add_option("--burn-in", o.burn_in);
  converge_cmd->add_option("--data", o.data_file, "Rows to draw evidence from instead of the test split");
  converge_cmd->add_option("--out", o.out);
  seed_opt(converge_cmd);

  auto* ablate_cmd = app.add_subcommand("ablate", "Deterministic against random initialization");
  data_opts(ablate_cmd);
  train_opts(ablate_cmd);
  seed_opt(ablate_cmd);
  ablate_cmd->add_option("--runs", o.runs);
  ablate_cmd->add_option("--out", o.out);

  auto* oracle_cmd = app.add_subcommand("oracle-check", "Fast paths against brute force on small models");
  seed_opt(oracle_cmd);
  oracle_cmd->add_option("--models", o.models);
  oracle_cmd->add_option("--max-n", o.max_n)->check(CLI::Range(2, 8));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (o.threads > 0) set_num_threads(o.threads);

  try {
    if (*train_cmd) return cmd_train(o);
    if (*eval_cmd) return cmd_eval(o);
    if (*loglik_cmd) return cmd_loglik(o);
    if (*sample_cmd) return cmd_sample(o);
    if (*infer_cmd) return cmd_infer(o);
    if (*converge_cmd) return cmd_converge(o);
    if (*ablate_cmd) return cmd_ablate(o);
    if (*oracle_cmd) return cmd_oracle_check(o);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
