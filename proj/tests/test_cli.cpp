#include "relu_optset/config.hpp"
#include "relu_optset/dataset.hpp"
#include "relu_optset/errors.hpp"
#include "relu_optset/run.hpp"

#include <doctest.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace relu_optset;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("relu_optset_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

void check_rectangular(const fs::path& p) {
  auto rows = read_csv(p);
  REQUIRE(!rows.empty());
  for (const auto& r : rows) CHECK(r.size() == rows[0].size());
}

ExperimentConfig gaussian_cfg(const fs::path& out) {
  return parse_config("[experiment]\nseed = 3\n[data]\nsource = gaussian\nn = 10\nd = 2\ntrain_frac = 0.6\n"
                      "val_frac = 0.2\n[model]\narch = relu\nlambda = 0.05\n[output]\ndir = " +
                      out.string() + "\n");
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(RELU_OPTSET_CLI) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct QuietLogs {
  QuietLogs() { spdlog::set_level(spdlog::level::warn); }
} quiet;

}  // namespace

TEST_CASE("parse_dataset") {
  Dataset d = parse_dataset("a,b,y\n1,2,3\n4,5,6\n7,8.5,-9\n");
  CHECK(d.n() == 3);
  CHECK(d.d() == 2);
  CHECK(d.y.size() == 3);
  CHECK(d.Z(2, 1) == 8.5);
  CHECK(d.y[2] == -9.0);
  CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(d.target_name == "y");
}

TEST_CASE("parse_dataset errors") {
  try {
    parse_dataset("a,b,y\n1,2,3\n4,NA,6\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    std::string msg = e.what();
    CHECK(msg.find("NA") != std::string::npos);
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_dataset(""), InputError);
  CHECK_THROWS_AS(parse_dataset("a,y\n"), InputError);
  CHECK_THROWS_AS(parse_dataset("a,b,y\n1,2\n"), ParseError);
  CHECK_THROWS_AS(parse_dataset("a,y\n1,inf\n"), ParseError);
}

TEST_CASE("load_dataset reads a file") {
  fs::path dir = scratch("load");
  put(dir / "d.csv", "x1,x2,t\n0.5,1,2\n1,1,1\n-1,0,0\n");
  Dataset d = load_dataset((dir / "d.csv").string());
  CHECK(d.n() == 3);
  CHECK(d.d() == 2);
}

TEST_CASE("split_dataset") {
  Split a = split_dataset(20, 0.6, 0.2, 5), b = split_dataset(20, 0.6, 0.2, 5);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK(a.train.size() == 12);
  CHECK(a.val.size() == 4);
  CHECK(a.test.size() == 4);
  std::set<int> all(a.train.begin(), a.train.end());
  all.insert(a.val.begin(), a.val.end());
  all.insert(a.test.begin(), a.test.end());
  CHECK(all.size() == 20);
  CHECK(split_dataset(20, 0.6, 0.2, 6).train != a.train);
}

TEST_CASE("parse_config") {
  ExperimentConfig c = parse_config("[data]\nsource = one_neuron\n[model]\nlambda_grid = 12:6:4\n");
  CHECK(c.source == "one_neuron");
  CHECK(c.lambda_grid == std::vector<double>{12, 10, 8, 6});
  CHECK_FALSE(c.seed.has_value());
  CHECK_THROWS_AS(parse_config("[data]\nsauce = gaussian\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[nope]\nx = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[model]\nlambda = abc\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[data]\nsource = csv\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[data]\nsource = gaussian\npath = x.csv\n"), ParseError);
  CHECK(parse_lambda_grid("1,0.5,0.25") == std::vector<double>{1, 0.5, 0.25});
  CHECK_THROWS_AS(ExperimentConfig{}.require_seed("x"), InputError);
}

TEST_CASE("to_ini round trip") {
  ExperimentConfig c = parse_config("[experiment]\nseed = 4\n[model]\nlambda = 0.25\narch = gated\n");
  ExperimentConfig d = parse_config(to_ini(c));
  CHECK(to_ini(d) == to_ini(c));
  CHECK(d.lambda == 0.25);
  CHECK(d.arch == Arch::gated);
}

TEST_CASE("tune on a problem with a single solution") {
  fs::path out = scratch("tune");
  REQUIRE(run("tune", gaussian_cfg(out)) == kOk);
  auto rows = read_csv(out / "tune.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"metric", "min_l2", "ep", "v_mse", "t_mse", "max_diff"});
  for (size_t r = 1; r < rows.size(); ++r) {
    for (size_t c = 2; c <= 4; ++c) CHECK(rows[r][c] == rows[r][1]);
    CHECK(rows[r][5] == "0");
  }
  CHECK(read_json(out / "tune.json")["data"]["uniqueness"]["verdict"] == "unique");
}

TEST_CASE("tune needs held-out rows") {
  ExperimentConfig c = gaussian_cfg(scratch("tune_err"));
  c.train_frac = 1.0;
  c.val_frac = 0.0;
  CHECK_THROWS_AS(run("tune", c), InputError);
}

TEST_CASE("path on the one-neuron fixture flags one jump") {
  fs::path out = scratch("path");
  ExperimentConfig c = parse_config("[data]\nsource = one_neuron\n[model]\nlambda_grid = 12:6:101\n[output]\ndir = " +
                                    out.string() + "\n");
  REQUIRE(run("path", c) == kOk);
  auto rows = read_csv(out / "path.csv");
  CHECK(rows[0] == std::vector<std::string>{"lambda", "objective", "fit_norm", "support_size", "jump_flag"});
  int jumps = 0;
  double at = 0;
  for (size_t r = 1; r < rows.size(); ++r)
    if (rows[r][4] == "1") ++jumps, at = std::stod(rows[r][0]);
  CHECK(jumps == 1);
  CHECK(at == doctest::Approx(9.12));
  check_rectangular(out / "path.csv");
}

TEST_CASE("probe-1d verdicts") {
  fs::path out = scratch("probe");
  ExperimentConfig c;
  c.out_dir = out.string();
  c.probe_sizes = {2};
  REQUIRE(run("probe-1d", c) == kOk);
  auto j = read_json(out / "probe_1d.json");
  CHECK(j["schema_version"] == "relu-optset/1");
  CHECK(j["kind"] == "probe-1d");
  auto e = j["data"]["entries"][0];
  CHECK(e["n"] == 2);
  CHECK(e["square_full_rank"] == true);
  CHECK(e["verdict"] == "unique");
}

TEST_CASE("commands write well-formed artifacts and rerun byte-identically") {
  for (const std::string cmd : {"solve", "describe", "prune", "patterns"}) {
    fs::path a = scratch("rerun_a_" + cmd), b = scratch("rerun_b_" + cmd);
    REQUIRE(run(cmd, gaussian_cfg(a)) == kOk);
    REQUIRE(run(cmd, gaussian_cfg(b)) == kOk);
    std::set<std::string> names;
    for (const auto& f : fs::directory_iterator(a)) names.insert(f.path().filename().string());
    CHECK_FALSE(names.empty());
    for (const auto& name : names) {
      CHECK_MESSAGE(slurp(a / name) == slurp(b / name), cmd << ": " << name);
      CHECK(name.find(".tmp") == std::string::npos);
      if (name.size() > 5 && name.substr(name.size() - 5) == ".json") {
        auto j = read_json(a / name);
        CHECK(j["schema_version"] == "relu-optset/1");
        CHECK(j["kind"] == cmd);
        CHECK(j.contains("data"));
      } else if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") {
        check_rectangular(a / name);
      }
    }
  }
}

TEST_CASE("solve reports a certified solution") {
  fs::path out = scratch("solve");
  REQUIRE(run("solve", gaussian_cfg(out)) == kOk);
  auto j = read_json(out / "solution.json")["data"];
  CHECK(j.contains("network"));
  CHECK(j.contains("network_objective"));
}

TEST_CASE("randomized steps need a seed") {
  ExperimentConfig c = gaussian_cfg(scratch("noseed"));
  c.seed.reset();
  CHECK_THROWS_AS(run("solve", c), InputError);
}

TEST_CASE("exit codes of the binary") {
  fs::path dir = scratch("exit");
  put(dir / "one.ini", "[data]\nsource = one_neuron\n[model]\nlambda_grid = 12:6:11\n[output]\ndir = " +
                           (dir / "one").string() + "\n");
  put(dir / "bad.ini", "[data]\nsorce = one_neuron\n");
  put(dir / "na.csv", "a,y\n1,2\nNA,3\n");
  put(dir / "na.ini", "[data]\nsource = csv\npath = " + (dir / "na.csv").string() + "\n[output]\ndir = " +
                          (dir / "na").string() + "\n");
  put(dir / "slow.ini", "[experiment]\nseed = 1\n[data]\nsource = gaussian\n[solver]\nmax_iters = 1\n[output]\ndir = " +
                            (dir / "slow").string() + "\n");
  const std::string cfg = " --config " + dir.string() + "/";
  CHECK(run_cli("path" + cfg + "one.ini") == 0);
  CHECK(fs::exists(dir / "one" / "path.csv"));
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("fly" + cfg + "one.ini") == 2);
  CHECK(run_cli("solve" + cfg + "bad.ini") == 2);
  CHECK(run_cli("solve" + cfg + "na.ini") == 2);
  CHECK(run_cli("solve" + cfg + "slow.ini") == 3);
  CHECK(run_cli("path" + cfg + "one.ini --out " + (dir / "other").string()) == 0);
  CHECK(fs::exists(dir / "other" / "path.csv"));
  CHECK(run_cli("solve --show-config" + cfg + "one.ini") == 0);
}
