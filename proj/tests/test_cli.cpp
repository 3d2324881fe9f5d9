#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args, const fs::path& cwd) {
  const fs::path log = cwd / "cmd_output.txt";
  const std::string cmd = "cd '" + cwd.string() + "' && '" + SHARPOPT_CLI_PATH + std::string("' ") +
                          args + " > '" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.out = ss.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sharpopt_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  return line;
}

}  // namespace

TEST_CASE("cli help exits zero and lists the command surface") {
  const fs::path dir = fresh_dir("help");
  CmdResult r = run_cli("--help", dir);
  CHECK(r.exit_code == 0);
  for (const char* needle : {"generate", "run", "sweep", "estimate", "--task", "--n",
                             "--m-multiple", "--solver", "--seed", "--out", "--config"})
    CHECK_MESSAGE(r.out.find(needle) != std::string::npos, "missing: ", needle);
}

TEST_CASE("cli config errors exit 1 and name the offending key") {
  const fs::path dir = fresh_dir("errors");

  CmdResult bad_task = run_cli("run --task nosuch --n 20", dir);
  CHECK(bad_task.exit_code == 1);
  CHECK(bad_task.out.find("config error") != std::string::npos);
  CHECK(bad_task.out.find("task") != std::string::npos);

  CmdResult bad_flag = run_cli("run --bogus-flag 3", dir);
  CHECK(bad_flag.exit_code == 1);
  CHECK(bad_flag.out.find("--bogus-flag") != std::string::npos);

  CmdResult bad_solver = run_cli("run --task sparse --n 20 --solver nosuch", dir);
  CHECK(bad_solver.exit_code == 1);
  CHECK(bad_solver.out.find("solver") != std::string::npos);

  CmdResult bad_k = run_cli("generate --task sparse --n 10 --k 10 --out g", dir);
  CHECK(bad_k.exit_code == 1);
  CHECK(bad_k.out.find("k") != std::string::npos);

  CmdResult no_verb = run_cli("--task sparse", dir);
  CHECK(no_verb.exit_code == 1);
}

TEST_CASE("cli generate writes instance.json and operator.bin") {
  const fs::path dir = fresh_dir("generate");
  CmdResult r = run_cli("generate --task sparse --n 30 --k 3 --m-multiple 2 --seed 5 --out g", dir);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "g" / "instance.json"));
  CHECK(fs::exists(dir / "g" / "operator.bin"));
  const std::string inst = read_file(dir / "g" / "instance.json");
  CHECK(inst.find("\"task\": \"sparse\"") != std::string::npos);
  CHECK(inst.find("\"n\": 30") != std::string::npos);
  CHECK(inst.find("\"provenance\"") != std::string::npos);
  CHECK(inst.find("\"x_true\"") != std::string::npos);
}

TEST_CASE("cli run writes provenance-stamped trace and summary, exit reflects status") {
  const fs::path dir = fresh_dir("run");
  CmdResult ok = run_cli(
      "run --task sparse --n 40 --k 3 --m-multiple 4 --seed 0 --tol 1e-5 "
      "--budget 2000000 --out ok",
      dir);
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("status=dist-reached") != std::string::npos);
  CHECK(first_line(dir / "ok" / "trace.csv").rfind("# tool=sharpopt", 0) == 0);
  const std::string summary = read_file(dir / "ok" / "summary.json");
  CHECK(summary.find("\"tool\": \"sharpopt\"") != std::string::npos);
  CHECK(summary.find("\"status\": \"dist-reached\"") != std::string::npos);

  CmdResult exhausted = run_cli(
      "run --task sparse --n 40 --k 3 --m-multiple 4 --seed 0 --tol 1e-12 "
      "--budget 50 --out spent",
      dir);
  CHECK(exhausted.exit_code == 2);
  CHECK(exhausted.out.find("budget-exhausted") != std::string::npos);
  CHECK(fs::exists(dir / "spent" / "trace.csv"));
  CHECK(fs::exists(dir / "spent" / "summary.json"));
}

TEST_CASE("cli config file is honored and flags override it") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream os(dir / "my.cfg");
    os << "task=sparse\nn=40\nk=3\nm-multiple=4\nseed=7\ntol=1e-5\nbudget=2000000\n";
  }
  CmdResult base = run_cli("run --config my.cfg --out base", dir);
  CHECK(base.exit_code == 0);
  CHECK(read_file(dir / "base" / "summary.json").find("\"seed\": 7") != std::string::npos);

  CmdResult over = run_cli("run --config my.cfg --seed 9 --out over", dir);
  CHECK(over.exit_code == 0);
  CHECK(read_file(dir / "over" / "summary.json").find("\"seed\": 9") != std::string::npos);
}

TEST_CASE("cli sweep outputs are byte-identical across reruns") {
  const fs::path dir = fresh_dir("sweep");
  const std::string args =
      "sweep --task sparse --n 30 --k 3 --m-multiple 2,4 --seed 0,1 "
      "--tol 1e-4 --budget 500000 --out ";
  CHECK(run_cli(args + "a", dir).exit_code == 0);
  CHECK(run_cli(args + "b", dir).exit_code == 0);
  CHECK(read_file(dir / "a" / "summary.json") == read_file(dir / "b" / "summary.json"));
  CHECK(read_file(dir / "a" / "plot_data.csv") == read_file(dir / "b" / "plot_data.csv"));
  CHECK(first_line(dir / "a" / "plot_data.csv").rfind("# tool=sharpopt", 0) == 0);
  CHECK(read_file(dir / "a" / "summary.json").find("\"cells\"") != std::string::npos);
}

TEST_CASE("cli estimate prints conditioning and rip lines") {
  const fs::path dir = fresh_dir("estimate");
  CmdResult cond = run_cli(
      "estimate --task sparse --n 40 --k 3 --m-multiple 4 --seed 1 "
      "--what conditioning --trials 100",
      dir);
  CHECK(cond.exit_code == 0);
  CHECK(cond.out.find("mu_hat=") != std::string::npos);
  CHECK(cond.out.find("L_hat=") != std::string::npos);
  CHECK(cond.out.find("kappa_hat=") != std::string::npos);

  CmdResult rip = run_cli(
      "estimate --task sparse --n 30 --k 3 --k-prime 2 --m-multiple 4 --seed 1 "
      "--what rip --trials 100",
      dir);
  CHECK(rip.exit_code == 0);
  CHECK(rip.out.find("rip_lower=") != std::string::npos);
  CHECK(rip.out.find("rip_upper=") != std::string::npos);

  CmdResult bad = run_cli("estimate --task sparse --n 30 --what nosuch", dir);
  CHECK(bad.exit_code == 1);
  CHECK(bad.out.find("what") != std::string::npos);
}
