#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "moat/errors.hpp"
#include "moat/data.hpp"
#include "moat/likelihood.hpp"
#include "moat/serialize.hpp"
#include "moat/st_sampler.hpp"
#include "moat/training.hpp"
#include "support.hpp"

#include <sys/wait.h>

using namespace moat;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("moat_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_rows(const fs::path& p, const DataMatrix& m) {
  std::ofstream out(p);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

DataMatrix sample_rows(const MoatModel& m, std::size_t rows, Rng& rng) {
  const TreeSampler sampler(m.domain.size(), m.weights);
  DataMatrix out;
  for (std::size_t i = 0; i < rows; ++i) out.append(tree_conditional_sample(sampler(rng), m.table, Evidence(m.domain.size()), rng));
  return out;
}

// A small dataset triple under <root>/toy.
fs::path make_toy_dataset(const std::string& name) {
  const fs::path root = scratch(name);
  fs::create_directories(root / "toy");
  Rng rng(42);
  const MoatModel gen = oracle::random_model(VarDomain::binary(6), rng);
  write_rows(root / "toy" / "toy.ts.data", sample_rows(gen, 400, rng));
  write_rows(root / "toy" / "toy.valid.data", sample_rows(gen, 100, rng));
  write_rows(root / "toy" / "toy.test.data", sample_rows(gen, 100, rng));
  return root;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + MOAT_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, read_file(out), read_file(err)};
}

}  // namespace

TEST_CASE("dataset parsing") {
  const DataMatrix m = parse_dataset("0,1,0\n1,1,0\n");
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 0) == 1);
  CHECK(m(0, 2) == 0);
  CHECK(parse_dataset("1,2\n\n0,3\n").rows() == 2);
  CHECK(parse_dataset("1, 2\r\n0,3\r\n").rows() == 2);
  const DataMatrix* splits[] = {&m};
  CHECK(infer_domain(splits) == VarDomain::binary(3));
}

TEST_CASE("malformed datasets name the offending line") {
  auto message = [](std::string_view text) {
    try {
      parse_dataset(text, "f.data");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("0,1,0\n1,1\n").find("f.data:2") != std::string::npos);
  CHECK(message("0,1\n0,x\n").find("f.data:2") != std::string::npos);
  CHECK(message("0,-1\n").find("f.data:1") != std::string::npos);
  CHECK(message("0,1,\n").find("f.data:1") != std::string::npos);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.data", Split::kTrain), DataError);
}

TEST_CASE("cardinality violations are rejected") {
  const DataMatrix m = parse_dataset("0,2\n1,1\n");
  CHECK_THROWS_AS(check_in_domain(m, VarDomain::binary(2)), DataError);
  CHECK_NOTHROW(check_in_domain(m, VarDomain({2, 3})));
  CHECK_THROWS_AS(check_in_domain(m, VarDomain::binary(3)), DataError);
}

TEST_CASE("dataset triples are found in nested or flat layouts") {
  const fs::path root = scratch("locate");
  fs::create_directories(root / "a");
  for (const char* s : {"ts", "valid", "test"}) {
    write_file(root / "a" / (std::string("a.") + s + ".data"), "0,1\n");
    write_file(root / (std::string("b.") + s + ".data"), "0,1\n");
  }
  write_file(root / "c.ts.data", "0\n");
  const auto a = locate_dataset(root.string(), "a");
  REQUIRE(a.has_value());
  CHECK(a->valid == (root / "a" / "a.valid.data").string());
  CHECK(locate_dataset(root.string(), "b").has_value());
  CHECK_FALSE(locate_dataset(root.string(), "c").has_value());
  const Dataset loaded = load_dataset(a->test, Split::kTest);
  CHECK(loaded.split == Split::kTest);
  CHECK(split_name(loaded.split) == "test");
}

TEST_CASE("model save and load is bit-identical") {
  Rng rng(1);
  const VarDomain d = random_domain(6, 4, rng);
  const FreeParams p = oracle::random_free_params(d, rng);
  const MoatModel m = realize(p, d);
  const fs::path dir = scratch("roundtrip");
  const std::string path = (dir / "model.json").string();
  save_model(path, m, &p);
  const LoadedModel back = load_model(path);
  CHECK(back.model.domain == m.domain);
  CHECK(back.model.weights == m.weights);
  CHECK(back.model.table == m.table);
  REQUIRE(back.params.has_value());
  CHECK(*back.params == p);
  for (int i = 0; i < 200; ++i) {
    const Assignment x = random_assignment(d, rng);
    CHECK(log_likelihood(back.model, x) == log_likelihood(m, x));
  }
  CHECK(model_to_json(back.model, &*back.params) == model_to_json(m, &p));
  const auto doc = nlohmann::json::parse(read_file(path));
  CHECK(doc["schema_version"] == kModelSchemaVersion);
  CHECK(!load_model(path).params->values().empty());
}

TEST_CASE("malformed model files are data errors") {
  CHECK_THROWS_AS(model_from_json("{"), DataError);
  CHECK_THROWS_AS(model_from_json(R"({"schema_version": 99})"), DataError);
  Rng rng(2);
  const VarDomain d = VarDomain::binary(3);
  const MoatModel m = oracle::random_model(d, rng);
  auto doc = nlohmann::json::parse(model_to_json(m));
  doc["edge_weights"].erase(0);
  CHECK_THROWS_AS(model_from_json(doc.dump()), DataError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), DataError);
}

TEST_CASE("run manifest fields") {
  RunManifest r{"train", {{"epochs", "3"}}, 7, {"in.data"}, {"model.json"}};
  const auto doc = nlohmann::json::parse(r.to_json());
  CHECK(doc["command"] == "train");
  CHECK(doc["seed"] == 7);
  CHECK(doc["config"]["epochs"] == "3");
  CHECK(doc["inputs"][0] == "in.data");
  CHECK(doc["outputs"][0] == "model.json");
  CHECK(doc["artifact_version"] == kArtifactVersion);
}

TEST_CASE("cli train, eval and determinism") {
  const fs::path root = make_toy_dataset("cli_train");
  const fs::path work = scratch("cli_train_work");
  const std::string base = "train --data-dir \"" + root.string() + "\" --dataset toy --epochs 3 --batch-size 64 --seed 5";
  const Run a = run_cli(base + " --out \"" + (work / "run").string() + "\"", work);
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const std::string model_a = read_file(work / "run" / "model.json");
  const std::string hist_a = read_file(work / "run" / "history.csv");
  const std::string manifest_a = read_file(work / "run" / "manifest.json");
  CHECK(hist_a.rfind("epoch,train_ll,valid_ll\n", 0) == 0);
  const auto manifest = nlohmann::json::parse(manifest_a);
  CHECK(manifest["command"] == "train");
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["config"]["epochs"] == "3");

  const Run b = run_cli("--threads 1 " + base + " --out \"" + (work / "run").string() + "\"", work);
  REQUIRE(b.code == 0);
  CHECK(read_file(work / "run" / "model.json") == model_a);
  CHECK(read_file(work / "run" / "history.csv") == hist_a);
  CHECK(read_file(work / "run" / "manifest.json") == manifest_a);
  CHECK(a.out == b.out);

  const std::string model = (work / "run" / "model.json").string();
  const Run ev = run_cli("eval --model \"" + model + "\" --data-dir \"" + root.string() + "\" --dataset toy", work);
  REQUIRE(ev.code == 0);
  const LoadedModel loaded = load_model(model);
  const DataMatrix test = load_dataset((root / "toy" / "toy.test.data").string(), Split::kTest).data;
  std::ostringstream want;
  want << std::fixed << std::setprecision(4) << batch_mean_log_likelihood(loaded.model, test) << "\n";
  CHECK(ev.out == want.str());

  const Run ll = run_cli("loglik --model \"" + model + "\" --data \"" + (root / "toy" / "toy.test.data").string() + "\"", work);
  REQUIRE(ll.code == 0);
  CHECK(ll.out.rfind("row,log_likelihood\n0,", 0) == 0);
}

TEST_CASE("cli infer with empty evidence recovers the univariates") {
  Rng rng(3);
  const VarDomain d = VarDomain::binary(5);
  const MoatModel m = oracle::random_model(d, rng);
  const fs::path work = scratch("cli_infer");
  const std::string model = (work / "m.json").string();
  save_model(model, m);
  const Run r = run_cli("infer --model \"" + model + "\" --evidence \"\" --method collapsed --samples 200 --seed 1", work);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "variable,value,probability");
  int rows = 0;
  while (std::getline(in, line)) {
    int v, a;
    double p;
    char c1, c2;
    std::istringstream ls(line);
    ls >> v >> c1 >> a >> c2 >> p;
    CHECK(p == doctest::Approx(m.table.uni(v, a)).epsilon(1e-5));
    ++rows;
  }
  CHECK(rows == 10);

  const Run is1 = run_cli("infer --model \"" + model + "\" --evidence 0=1,3=0 --method is --samples 500 --seed 9 --hist-out \"" +
                              (work / "h1.csv").string() + "\"",
                          work);
  const Run is2 = run_cli("infer --model \"" + model + "\" --evidence 0=1,3=0 --method is --samples 500 --seed 9 --hist-out \"" +
                              (work / "h2.csv").string() + "\"",
                          work);
  REQUIRE(is1.code == 0);
  CHECK(is1.out == is2.out);
  CHECK(read_file(work / "h1.csv") == read_file(work / "h2.csv"));
  CHECK(read_file(work / "h1.csv").rfind("bin_lo,bin_hi,count\n", 0) == 0);

  const Run g = run_cli("infer --model \"" + model + "\" --evidence 2=1 --method gibbs --samples 300 --burn-in 10", work);
  CHECK(g.code == 0);
}

TEST_CASE("cli sample, converge and oracle-check") {
  Rng rng(4);
  const VarDomain d = VarDomain::binary(5);
  const MoatModel m = oracle::random_model(d, rng);
  const fs::path work = scratch("cli_misc");
  const std::string model = (work / "m.json").string();
  save_model(model, m);
  const Run s1 = run_cli("sample --model \"" + model + "\" --samples 20 --seed 3", work);
  const Run s2 = run_cli("sample --model \"" + model + "\" --samples 20 --seed 3", work);
  REQUIRE(s1.code == 0);
  CHECK(s1.out == s2.out);
  const DataMatrix drawn = parse_dataset(s1.out);
  CHECK(drawn.rows() == 20);
  CHECK_NOTHROW(check_in_domain(drawn, d));

  write_rows(work / "rows.data", drawn);
  const Run c = run_cli("converge --model \"" + model + "\" --data \"" + (work / "rows.data").string() +
                            "\" --evidence-sizes 1,2 --counts 10,100 --methods is,collapsed,gibbs --seeds 2 --burn-in 5",
                        work);
  REQUIRE_MESSAGE(c.code == 0, c.err);
  std::istringstream in(c.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "method,evidence_size,seed,sample_count,mean_kl");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 2 * 3 * 2);

  const Run o = run_cli("oracle-check --models 20 --max-n 5 --seed 1", work);
  CHECK(o.code == 0);
  CHECK(o.out.find("failures=0") != std::string::npos);
}

TEST_CASE("cli ablate emits both curves") {
  const fs::path root = make_toy_dataset("cli_ablate");
  const fs::path work = scratch("cli_ablate_work");
  const Run r = run_cli("ablate --data-dir \"" + root.string() + "\" --dataset toy --epochs 1 --runs 2 --batch-size 64", work);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.rfind("init,run,seed,epoch,train_ll,valid_ll\n", 0) == 0);
  CHECK(r.out.find("\ndeterministic,1,") != std::string::npos);
  CHECK(r.out.find("\nrandom,1,") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  const fs::path work = scratch("cli_exit");
  CHECK(run_cli("", work).code == 1);
  CHECK(run_cli("frobnicate", work).code == 1);
  CHECK(run_cli("eval", work).code == 1);
  CHECK(run_cli("infer --model /nonexistent.json", work).code == 2);
  CHECK(run_cli("train --data-dir \"" + work.string() + "\" --dataset missing", work).code == 2);
  const fs::path root = make_toy_dataset("cli_exit_data");
  write_file(root / "toy" / "toy.valid.data", "0,1\n");
  CHECK(run_cli("train --data-dir \"" + root.string() + "\" --dataset toy --epochs 1", work).code == 2);

  Rng rng(5);
  const VarDomain d = VarDomain::binary(3);
  std::vector<double> joint(8, 0.0);
  joint[0] = joint[7] = 0.5;
  save_model((work / "det.json").string(), MoatModel(d, std::vector<double>(3, 1.0), marginals_from_distribution(joint, d)));
  const Run bad = run_cli("infer --model \"" + (work / "det.json").string() + "\" --evidence 0=0,1=1 --method is --samples 5", work);
  CHECK(bad.code == 3);
  CHECK(bad.err.find("numeric error") != std::string::npos);
  CHECK(run_cli("infer --model \"" + (work / "det.json").string() + "\" --evidence 0=5", work).code == 2);
}

TEST_CASE("data root falls back to the environment") {
  const fs::path root = make_toy_dataset("cli_env");
  const fs::path work = scratch("cli_env_work");
  const std::string cmd = "MOAT_DATA_DIR=\"" + root.string() + "\" ";
  const fs::path out = work / "o.txt";
  const int status = std::system((cmd + "\"" + MOAT_CLI_PATH + "\" train --dataset toy --epochs 0 --out \"" +
                                  (work / "r").string() + "\" > \"" + out.string() + "\" 2>&1")
                                     .c_str());
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(work / "r" / "model.json"));
}
