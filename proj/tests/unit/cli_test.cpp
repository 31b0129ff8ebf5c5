#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "tripletlm/cli.hpp"
#include "tripletlm/io.hpp"

namespace fs = std::filesystem;
using tripletlm::read_file;
using tripletlm::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "tripletlm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = tripletlm::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

const char* kSpec =
    "n_clusters = 2\nitems_per_cluster = 5\ndescription_words = 6\nseed = 3\n";
const char* kConfig =
    "batch_size = 4\nsteps = 6\nd_model = 8\nn_layers = 1\nn_heads = 2\n"
    "vocab_size = 64\nmax_seq_len = 16\nseed = 11\n";

// synth -> train -> embed -> rank -> eval, returning every produced artifact.
std::map<std::string, std::string> pipeline(const TempDir& dir) {
  write(dir / "spec.txt", kSpec);
  write(dir / "config.txt", kConfig);
  const auto p = [&](const char* name) { return (dir / name).string(); };
  REQUIRE(run({"synth", "--spec", p("spec.txt"), "--out-data", p("data.jsonl"),
               "--out-annotations", p("ann.jsonl")}).code == 0);
  REQUIRE(run({"train", "--config", p("config.txt"), "--data", p("data.jsonl"), "--out",
               p("model.ckpt")}).code == 0);
  REQUIRE(run({"embed", "--checkpoint", p("model.ckpt"), "--data", p("data.jsonl"), "--out",
               p("emb.jsonl")}).code == 0);
  REQUIRE(run({"rank", "--embeddings", p("emb.jsonl"), "--all", "--out", p("ranks.csv")}).code == 0);
  const Result eval = run({"eval", "--rankings", p("ranks.csv"), "--annotations", p("ann.jsonl"),
                           "--k", "1,3"});
  REQUIRE(eval.code == 0);
  std::map<std::string, std::string> files;
  for (const char* name : {"data.jsonl", "ann.jsonl", "model.ckpt", "model.ckpt.metrics.csv",
                           "emb.jsonl", "ranks.csv"}) {
    files[name] = read_file(dir / name);
  }
  files["eval"] = eval.out;
  return files;
}

}  // namespace

TEST_CASE("end-to-end pipeline") {
  TempDir dir;
  const auto files = pipeline(dir);
  CHECK(files.at("model.ckpt").rfind("TLMCKPT1", 0) == 0);
  const std::string& metrics = files.at("model.ckpt.metrics.csv");
  CHECK(metrics.rfind("# seed=11\nstep,mlm,metric,total\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 2 + 6);
  CHECK(files.at("ranks.csv").rfind("# seed=11\nsource_id,candidate_id,rank,score\n", 0) == 0);
  // 10 sources x 9 candidates + 2 header lines.
  CHECK(std::count(files.at("ranks.csv").begin(), files.at("ranks.csv").end(), '\n') == 92);
  const std::string& eval = files.at("eval");
  CHECK(eval.rfind("# seed=11\nmpr,mrr,hr1,hr3\n", 0) == 0);
  CHECK(std::count(eval.begin(), eval.end(), '\n') == 3);
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    CHECK(entry.path().extension() != ".tmp");
  }
}

TEST_CASE("pipeline outputs are byte-identical across runs") {
  TempDir a, b;
  CHECK(pipeline(a) == pipeline(b));
}

TEST_CASE("seed flag overrides the config") {
  TempDir dir;
  write(dir / "spec.txt", kSpec);
  write(dir / "config.txt", kConfig);
  const auto p = [&](const char* name) { return (dir / name).string(); };
  REQUIRE(run({"synth", "--spec", p("spec.txt"), "--out-data", p("data.jsonl"),
               "--out-annotations", p("ann.jsonl")}).code == 0);
  REQUIRE(run({"train", "--config", p("config.txt"), "--data", p("data.jsonl"), "--out",
               p("m.ckpt"), "--seed", "77"}).code == 0);
  CHECK(read_file(dir / "m.ckpt.metrics.csv").rfind("# seed=77\n", 0) == 0);
}

TEST_CASE("single-source ranking") {
  TempDir dir;
  pipeline(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };
  const Result r = run({"rank", "--embeddings", p("emb.jsonl"), "--source", "item0000", "--out",
                        p("one.csv")});
  REQUIRE(r.code == 0);
  const std::string text = read_file(dir / "one.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 9);
  CHECK(text.find("\nitem0000,item0000,") == std::string::npos);
}

TEST_CASE("ablation table") {
  TempDir dir;
  pipeline(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };
  const Result r = run({"ablate", "--config", p("config.txt"), "--data", p("data.jsonl"),
                        "--annotations", p("ann.jsonl"), "--out", p("table.csv")});
  REQUIRE(r.code == 0);
  const std::string table = read_file(dir / "table.csv");
  CHECK(table.rfind("# seed=11\nvariant,mpr,mrr,hr10,hr100\ntriplet_hard,", 0) == 0);
  for (const char* v : {"triplet_random", "contrastive_pair", "cosine_pair",
                        "triplet_cosine_metric", "triplet_no_mlm"}) {
    CHECK(table.find(std::string("\n") + v + ",") != std::string::npos);
  }
  CHECK(table.find("nan") == std::string::npos);
}

TEST_CASE("usage errors exit with the usage code") {
  TempDir dir;
  write(dir / "config.txt", kConfig);
  write(dir / "bad.txt", "warp_factor = 9\n");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"teleport"},
           {"train", "--config", p("config.txt")},
           {"train", "--config", p("config.txt"), "--data", p("missing.jsonl"), "--out", p("m")},
           {"train", "--config", p("bad.txt"), "--data", p("config.txt"), "--out", p("m")},
           {"embed", "--checkpoint", p("m"), "--data", p("d"), "--out", p("o"), "--bogus"},
           {"rank", "--embeddings", p("config.txt"), "--out", p("o")},
           {"eval", "--rankings", p("config.txt"), "--annotations", p("config.txt"), "--k", "0"},
       }) {
    const Result r = run(args);
    INFO(r.err);
    CHECK(r.code == tripletlm::cli::kExitUsage);
    CHECK(r.err.rfind("error: usage: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
}

TEST_CASE("runtime errors exit with the runtime code") {
  TempDir dir;
  pipeline(dir);
  write(dir / "junk.ckpt", "not a checkpoint");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  struct Case {
    std::vector<std::string> args;
    std::string kind;
  };
  for (const auto& c : std::vector<Case>{
           {{"embed", "--checkpoint", p("junk.ckpt"), "--data", p("data.jsonl"), "--out", p("e")},
            "checkpoint"},
           {{"rank", "--embeddings", p("emb.jsonl"), "--source", "nope", "--out", p("r")}, "lookup"},
           {{"embed", "--checkpoint", p("model.ckpt"), "--data", p("ann.jsonl"), "--out", p("e")},
            "ingestion"},
       }) {
    const Result r = run(c.args);
    INFO(r.err);
    CHECK(r.code == tripletlm::cli::kExitRuntime);
    CHECK(r.err.rfind("error: " + c.kind + ": ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
  CHECK_FALSE(fs::exists(dir / "e"));
  CHECK_FALSE(fs::exists(dir / "r"));
}

TEST_CASE("help exits cleanly") {
  const Result r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("train") != std::string::npos);
}
