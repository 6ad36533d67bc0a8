#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "retypelab/pipeline.hpp"

using retypelab::cli::kExitOk;
using retypelab::cli::kExitValidation;
using retypelab::cli::run;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("retypelab_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("synth -> build -> train -> eval smoke path writes a metrics CSV") {
  TempDir tmp;
  write(tmp.file("synth.cfg"), "count.all=8\ncallers_per_function=1\n");
  CHECK(run({"--seed", "3", "--no-timestamp", "--config", tmp.file("synth.cfg"), "synth", "--out",
             tmp.file("corpus.lst")}) == kExitOk);
  CHECK(run({"--seed", "3", "--no-timestamp", "build", "--in", tmp.file("corpus.lst"), "--out",
             tmp.file("data.csv")}) == kExitOk);
  CHECK(run({"--seed", "3", "--no-timestamp", "train", "--data", tmp.file("data.csv"),
             "--algorithm", "decision_tree", "--out", tmp.file("model.json")}) == kExitOk);
  CHECK(run({"--seed", "3", "--no-timestamp", "eval", "--method", "1", "--synth",
             tmp.file("data.csv"), "--reps", "5", "--out-dir", tmp.file("reports")}) == kExitOk);
  CHECK(fs::exists(tmp.file("reports/metrics.csv")));
  CHECK(fs::exists(tmp.file("reports/accuracies.csv")));
  CHECK(fs::exists(tmp.file("reports/confusion.csv")));
  CHECK(fs::exists(tmp.file("reports/config.txt")));  // provenance echo
  CHECK(slurp(tmp.file("reports/comparison.csv")).find("decision_tree") != std::string::npos);
  std::string summary = slurp(tmp.file("reports/summary.txt"));
  CHECK(summary.find("accuracy mean=") != std::string::npos);
  CHECK(summary.find("IDA") != std::string::npos);  // baseline block
  // the report command aggregates the directory
  CHECK(run({"--no-timestamp", "report", "--dir", tmp.file("reports"), "--out",
             tmp.file("report.txt")}) == kExitOk);
  CHECK(slurp(tmp.file("report.txt")).find("summary.txt") != std::string::npos);

  // method 2 consumes a real and a synthetic dataset and writes the sweep
  write(tmp.file("real.cfg"), "count.all=8\ncallers_per_function=1\n");
  REQUIRE(run({"--seed", "19", "--no-timestamp", "--config", tmp.file("real.cfg"), "synth",
               "--out", tmp.file("real.lst")}) == kExitOk);
  REQUIRE(run({"--seed", "19", "--no-timestamp", "build", "--in", tmp.file("real.lst"), "--out",
               tmp.file("real.csv")}) == kExitOk);
  CHECK(run({"--seed", "19", "--no-timestamp", "eval", "--method", "2", "--real",
             tmp.file("real.csv"), "--synth", tmp.file("data.csv"), "--reps", "3", "--out-dir",
             tmp.file("reports2")}) == kExitOk);
  CHECK(fs::exists(tmp.file("reports2/trace.csv")));
  CHECK(slurp(tmp.file("reports2/summary.txt")).find("stop at") != std::string::npos);
}

TEST_CASE("predict labels a template-pure int function as int") {
  TempDir tmp;
  write(tmp.file("synth.cfg"), "count.all=20\n");
  REQUIRE(run({"--seed", "5", "--no-timestamp", "--config", tmp.file("synth.cfg"), "synth",
               "--out", tmp.file("corpus.lst")}) == kExitOk);
  REQUIRE(run({"--seed", "5", "--no-timestamp", "build", "--in", tmp.file("corpus.lst"), "--out",
               tmp.file("data.csv")}) == kExitOk);
  REQUIRE(run({"--seed", "5", "--no-timestamp", "train", "--data", tmp.file("data.csv"),
               "--algorithm", "decision_tree", "--out", tmp.file("model.json")}) == kExitOk);
  write(tmp.file("unknown.lst"),
        ".func _mystery\n"
        "    push ebp\n"
        "    mov ebp, esp\n"
        "    mov eax, 42\n"
        "    mov esp, ebp\n"
        "    pop ebp\n"
        "    retn\n"
        ".endfunc\n"
        ".func _site\n"
        "    push ebp\n"
        "    mov ebp, esp\n"
        "    call _mystery\n"
        "    add esp, 4\n"
        "    mov [ebp+var_4], eax\n"
        "    pop ebp\n"
        "    retn\n"
        ".endfunc\n");
  REQUIRE(run({"--no-timestamp", "predict", "--model", tmp.file("model.json"), "--in",
               tmp.file("unknown.lst"), "--out", tmp.file("pred.csv")}) == kExitOk);
  std::string pred = slurp(tmp.file("pred.csv"));
  CHECK(pred.find("_mystery,int") != std::string::npos);
}

TEST_CASE("select, tune and mine commands run on a small corpus") {
  TempDir tmp;
  write(tmp.file("synth.cfg"), "count.all=10\n");
  REQUIRE(run({"--seed", "7", "--no-timestamp", "--config", tmp.file("synth.cfg"), "synth",
               "--out", tmp.file("corpus.lst")}) == kExitOk);
  REQUIRE(run({"--seed", "7", "--no-timestamp", "build", "--in", tmp.file("corpus.lst"), "--out",
               tmp.file("data.csv")}) == kExitOk);
  CHECK(run({"--seed", "7", "--no-timestamp", "select", "--data", tmp.file("data.csv"),
             "--methods", "sfm_rf_mean,sfm_rf_median", "--out", tmp.file("sel.csv")}) == kExitOk);
  std::string sel = slurp(tmp.file("sel.csv"));
  CHECK(sel.find("sfm_rf_mean") != std::string::npos);
  CHECK(run({"--seed", "7", "--no-timestamp", "tune", "--data", tmp.file("data.csv"),
             "--algorithm", "bernoulli_nb", "--out", tmp.file("grid.csv")}) == kExitOk);
  CHECK(slurp(tmp.file("grid.csv")).find("alpha") != std::string::npos);
  CHECK(run({"--seed", "7", "--no-timestamp", "mine", "--data", tmp.file("data.csv"),
             "--min-support", "0.02", "--out", tmp.file("rules.txt")}) == kExitOk);
  std::string rules = slurp(tmp.file("rules.txt"));
  CHECK(rules.find("RULE 1: IF") != std::string::npos);
  // trained on the winner columns
  CHECK(run({"--seed", "7", "--no-timestamp", "train", "--data", tmp.file("data.csv"),
             "--selection", tmp.file("sel.csv"), "--out", tmp.file("model2.json")}) == kExitOk);
}

TEST_CASE("RETYPELAB_CONFIG is the config fallback") {
  TempDir tmp;
  write(tmp.file("env.cfg"), "count.all=4\n");
  ::setenv("RETYPELAB_CONFIG", tmp.file("env.cfg").c_str(), 1);
  CHECK(run({"--seed", "2", "--no-timestamp", "synth", "--out", tmp.file("env_corpus.lst")}) ==
        kExitOk);
  ::unsetenv("RETYPELAB_CONFIG");
  std::string listing = slurp(tmp.file("env_corpus.lst"));
  CHECK(listing.find(".func _bool_3") != std::string::npos);   // four per type
  CHECK(listing.find(".func _bool_4") == std::string::npos);
}

TEST_CASE("runtime failures use a distinct exit code from validation") {
  TempDir tmp;
  // single-class dataset: file parses (validation passes) but training fails
  write(tmp.file("single.csv"),
        "#scheme=high_level\n\"RET: a\",\"return_type\"\n1,int\n0,int\n");
  CHECK(run({"train", "--data", tmp.file("single.csv"), "--out", tmp.file("m.json")}) ==
        retypelab::cli::kExitRuntime);
}

TEST_CASE("validation failures exit with the validation code") {
  TempDir tmp;
  // missing files
  CHECK(run({"build", "--in", tmp.file("nope.lst"), "--out", tmp.file("x.csv")}) ==
        kExitValidation);
  CHECK(run({"train", "--data", tmp.file("nope.csv"), "--out", tmp.file("m.json")}) ==
        kExitValidation);
  // method 3 with a single program
  write(tmp.file("one.csv"), "#scheme=high_level\n\"RET: a\",\"return_type\"\n1,int\n0,void\n");
  CHECK(run({"eval", "--method", "3", "--programs", tmp.file("one.csv"), "--out-dir",
             tmp.file("r")}) == kExitValidation);
  // malformed dataset cell
  write(tmp.file("bad.csv"), "#scheme=high_level\n\"RET: a\",\"return_type\"\n2,int\n");
  CHECK(run({"train", "--data", tmp.file("bad.csv"), "--out", tmp.file("m.json")}) ==
        kExitValidation);
  // unknown subcommand / flag
  CHECK(run({"frobnicate"}) == kExitValidation);
}

TEST_CASE("fixed seed reproduces byte-identical outputs with --no-timestamp") {
  TempDir tmp;
  write(tmp.file("synth.cfg"), "count.all=6\n");
  auto produce = [&](const std::string& tag) {
    REQUIRE(run({"--seed", "11", "--no-timestamp", "--config", tmp.file("synth.cfg"), "synth",
                 "--out", tmp.file(tag + ".lst")}) == kExitOk);
    REQUIRE(run({"--seed", "11", "--no-timestamp", "build", "--in", tmp.file(tag + ".lst"),
                 "--out", tmp.file(tag + ".csv")}) == kExitOk);
    return slurp(tmp.file(tag + ".lst")) + "\x01" + slurp(tmp.file(tag + ".csv"));
  };
  CHECK(produce("a") == produce("b"));
}
