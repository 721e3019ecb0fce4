#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell; env is a prefix such as "BAHOP_OUT=/x ".
Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + std::string(BAHOP_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct Sandbox {
  fs::path root;
  Sandbox() {
    root = fs::temp_directory_path() / ("bahop-cli-" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "small.json") << R"({"run_id": "b", "strategy": "bahop", "budget": 25,
      "space": "small", "cohort": {"slides": 8}})";
    std::ofstream(root / "bad.json") << R"({"strategy": "bahop", "budget": -1})";
  }
  ~Sandbox() { fs::remove_all(root); }
  std::string out() const { return "--out " + root.string() + "/o "; }
};

}  // namespace

TEST_CASE("cli exit codes and artifacts") {
  Sandbox s;
  const std::string o = s.out();

  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);

  const std::string cohort = (s.root / "cohort").string();
  auto g = cli(o + "generate --seed 1 --slides 8 --dir " + cohort);
  CHECK(g.code == 0);
  CHECK(fs::exists(cohort + "/cohort.json"));
  CHECK(cli(o + "generate --seed 1 --slides 8 --dir " + cohort).code == 0);
  CHECK(cli(o + "generate --seed 2 --slides 8 --dir " + cohort).code == 2);
  CHECK(cli(o + "generate --seed 2 --slides 8 --force --dir " + cohort).code == 0);
  CHECK(cli(o + "generate --slides 3 --dir " + (s.root / "c3").string()).code == 2);

  CHECK(cli(o + "optimize --config " + (s.root / "bad.json").string()).code == 2);
  CHECK(cli(o + "optimize --config " + (s.root / "nothere.json").string()).code == 4);
  CHECK(cli(o + "optimize --config " + (s.root / "small.json").string() + " --budget many").code == 2);

  const auto r = cli(o + "optimize --config " + (s.root / "small.json").string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("run b") != std::string::npos);
  CHECK(fs::exists(s.root / "o" / "runs" / "b" / "ledger.jsonl"));

  const auto v = cli(o + "verify b");
  CHECK(v.code == 0);
  CHECK(v.out.find("PASS") != std::string::npos);

  const auto c = cli(o + "compare b b");
  CHECK(c.code == 0);
  CHECK(c.out.rfind("strategy\trun_id", 0) == 0);
  CHECK(cli(o + "compare missing").code == 4);
  CHECK(cli(o + "landscape b").code == 2);

  // hand-edited objective
  const fs::path ledger = s.root / "o" / "runs" / "b" / "ledger.jsonl";
  std::stringstream ss;
  ss << std::ifstream(ledger).rdbuf();
  std::string text = ss.str();
  const auto pos = text.find("\"objective\":", text.find("\"iteration\":0"));
  REQUIRE(pos != std::string::npos);
  text.replace(pos, text.find(',', pos) - pos, "\"objective\":0.0625");
  std::ofstream(ledger, std::ios::trunc) << text;
  const auto bad = cli(o + "verify b");
  CHECK(bad.code == 3);
  CHECK(bad.out.find("objective-replay") != std::string::npos);

  // a held lock blocks a second invocation on the same run
  std::ofstream(s.root / "o" / "runs" / "b" / ".lock") << "1\n";
  CHECK(cli(o + "verify b").code == 4);
  fs::remove(s.root / "o" / "runs" / "b" / ".lock");
}

TEST_CASE("BAHOP_OUT selects the output root") {
  Sandbox s;
  const std::string env = "BAHOP_OUT=" + (s.root / "env").string() + " ";
  const auto r = cli("optimize --config " + (s.root / "small.json").string() + " --budget 3", env);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(s.root / "env" / "runs" / "b" / "manifest.json"));
  // --out wins over the environment
  const auto r2 = cli(s.out() + "optimize --config " + (s.root / "small.json").string() + " --budget 3", env);
  CHECK(r2.code == 0);
  CHECK(fs::exists(s.root / "o" / "runs" / "b" / "manifest.json"));
}

TEST_CASE("psnr printing in the landscape export") {
  Sandbox s;
  std::ofstream(s.root / "grid.json") << R"({"run_id": "g", "strategy": "grid", "budget": "full",
    "cohort": {"slides": 8, "width": 1024, "height": 1024}})";
  const auto r = cli(s.out() + "optimize --config " + (s.root / "grid.json").string());
  REQUIRE(r.code == 0);
  const auto l = cli(s.out() + "landscape g");
  REQUIRE(l.code == 0);
  CHECK(l.out.find("rows 1296") != std::string::npos);
  std::ifstream in(s.root / "o" / "runs" / "g" / "landscape.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "key,seg_thresh,blur_k,close_k,area_tissue_min,area_hole_min,max_holes,objective,psnr,gap");
  std::size_t rows = 0, inf = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto a = line.rfind(',');
    const auto b = line.rfind(',', a - 1);
    const std::string psnr = line.substr(b + 1, a - b - 1);
    if (psnr == "inf") {
      ++inf;
    } else {
      const auto dot = psnr.find('.');
      REQUIRE(dot != std::string::npos);
      CHECK(psnr.size() - dot - 1 == 4);
    }
  }
  CHECK(rows == 1296);
  CHECK(inf >= 1);
}
