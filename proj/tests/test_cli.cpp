#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "app.hpp"
#include "boxtax/corpus.hpp"
#include "boxtax/errors.hpp"
#include "boxtax/planted.hpp"

namespace boxtax {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("boxtax_test_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_docs(const fs::path& p, std::uint64_t seed, int docs = 80) {
  PlantedConfig pc;
  pc.leaves_per_group = 2;
  pc.words_per_leaf = 8;
  pc.docs = docs;
  pc.min_length = 10;
  pc.max_length = 15;
  pc.seed = seed;
  std::ofstream out(p);
  for (const auto& d : generate_planted(pc).docs) out << d << '\n';
}

app::CommonOptions small_run(const fs::path& out_dir) {
  app::CommonOptions c;
  c.out_dir = out_dir;
  c.overrides = {"corpus.min_count=1",   "corpus.default_stopwords=false", "box.dim=5",
                 "train.leaf_topics=4",  "train.hidden=16",                "train.batch_size=16",
                 "train.co_batch_size=64", "train.gamma=2",                "train.k=2"};
  return c;
}

// Preprocessed corpus shared by the tests that need one.
class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    write_docs(dir_ / "docs.txt", 7);
    std::ostringstream out;
    ASSERT_EQ(app::cmd_preprocess(dir_ / "docs.txt", small_run(dir_ / "corpus"), out), 0);
  }
  int train(const std::string& run, int epochs, bool resume = false) {
    app::TrainOptions t;
    t.corpus_dir = dir_ / "corpus";
    t.epochs = epochs;
    t.resume = resume;
    t.quiet = true;
    std::ostringstream out;
    return app::cmd_train(t, small_run(dir_ / run), out);
  }
  TempDir dir_;
};

TEST(Preprocess, ArtifactsAreByteIdenticalAcrossRuns) {
  TempDir dir;
  write_docs(dir / "docs.txt", 3);
  std::ostringstream out;
  ASSERT_EQ(app::cmd_preprocess(dir / "docs.txt", small_run(dir / "a"), out), 0);
  EXPECT_NE(out.str().find("vocabulary 32 words, 80 documents"), std::string::npos) << out.str();
  ASSERT_EQ(app::cmd_preprocess(dir / "docs.txt", small_run(dir / "b"), out), 0);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    EXPECT_EQ(read_file(entry.path()), read_file(dir / "b" / name)) << name;
    ++files;
  }
  EXPECT_EQ(files, 6);
}

TEST(Preprocess, EmptyInputIsAnError) {
  TempDir dir;
  std::ofstream(dir / "empty.txt").close();
  std::ostringstream out;
  try {
    app::cmd_preprocess(dir / "empty.txt", small_run(dir / "c"), out);
    FAIL() << "no exception";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("empty corpus"), std::string::npos);
  }
}

TEST(Preprocess, SeedOverridesTheSplit) {
  TempDir dir;
  write_docs(dir / "docs.txt", 3);
  std::ostringstream out;
  auto a = small_run(dir / "a");
  auto b = small_run(dir / "b");
  b.seed = 5;
  app::cmd_preprocess(dir / "docs.txt", a, out);
  app::cmd_preprocess(dir / "docs.txt", b, out);
  EXPECT_NE(read_file(dir / "a" / "splits.txt"), read_file(dir / "b" / "splits.txt"));
  EXPECT_EQ(read_file(dir / "a" / "vocab.json"), read_file(dir / "b" / "vocab.json"));
}

TEST(ResolveConfig, RejectsMalformedOverrides) {
  app::CommonOptions c;
  c.overrides = {"train.k"};
  EXPECT_THROW(app::resolve_config(c), PreconditionError);
  c.overrides = {"train.k=4"};
  EXPECT_EQ(app::resolve_config(c).train.levels, 4);
}

TEST_F(Cli, ZeroEpochsWritesInitialTaxonomy) {
  ASSERT_EQ(train("run", 0), 0);
  for (const char* f : {"checkpoint.json", "best.json", "taxonomy.json", "train.jsonl"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  EXPECT_TRUE(read_file(dir_ / "run" / "train.jsonl").empty());
  const auto tax = json::parse(read_file(dir_ / "run" / "taxonomy.json"));
  EXPECT_EQ(tax.at("levels").size(), 2u);
  EXPECT_EQ(tax.at("levels")[0].size(), 4u);
}

TEST_F(Cli, ResumedRunMatchesUninterruptedRun) {
  ASSERT_EQ(train("full", 4), 0);
  ASSERT_EQ(train("split", 2), 0);
  ASSERT_EQ(train("split", 4, true), 0);
  EXPECT_EQ(read_file(dir_ / "full" / "train.jsonl"), read_file(dir_ / "split" / "train.jsonl"));
  EXPECT_EQ(read_file(dir_ / "full" / "taxonomy.json"), read_file(dir_ / "split" / "taxonomy.json"));
  EXPECT_EQ(read_file(dir_ / "full" / "checkpoint.json"), read_file(dir_ / "split" / "checkpoint.json"));
  std::istringstream log(read_file(dir_ / "full" / "train.jsonl"));
  int lines = 0;
  for (std::string line; std::getline(log, line); ++lines) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("epoch"), lines);
    EXPECT_GE(j.at("min_batch_kl").get<double>(), 0.0);
  }
  EXPECT_EQ(lines, 4);
  // Resuming a run that was never started fails cleanly.
  EXPECT_THROW(train("missing", 4, true), PreconditionError);
}

TEST_F(Cli, EvalWritesReportAndChecksVocabulary) {
  ASSERT_EQ(train("run", 1), 0);
  std::ostringstream out;
  app::CommonOptions eval_opts;
  eval_opts.out_dir = dir_ / "eval";
  ASSERT_EQ(app::cmd_eval(dir_ / "run" / "checkpoint.json", dir_ / "corpus", eval_opts, out), 0);
  const auto m = json::parse(read_file(dir_ / "eval" / "metrics.json"));
  for (const char* key : {"C", "D", "CD", "HC"}) EXPECT_TRUE(m.at("overall").contains(key)) << key;
  EXPECT_EQ(m.at("levels").size(), 2u);
  EXPECT_EQ(read_file(dir_ / "eval" / "metrics.txt"), out.str());

  write_docs(dir_ / "other.txt", 99, 60);
  auto other = small_run(dir_ / "other_corpus");
  other.overrides.push_back("corpus.max_vocab=20");
  app::cmd_preprocess(dir_ / "other.txt", other, out);
  try {
    app::cmd_eval(dir_ / "run" / "checkpoint.json", dir_ / "other_corpus", eval_opts, out);
    FAIL() << "no exception";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("vocabulary mismatch"), std::string::npos);
  }
}

TEST_F(Cli, ExportFormats) {
  ASSERT_EQ(train("run", 1), 0);
  const fs::path ckpt = dir_ / "run" / "checkpoint.json";
  std::ostringstream js, txt, out;
  ASSERT_EQ(app::cmd_export(ckpt, "json", 5, {}, js), 0);
  const auto tax = json::parse(js.str());
  const auto& levels = tax.at("levels");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    for (const auto& t : levels[k]) {
      EXPECT_EQ(t.at("keywords").size(), 5u);
      if (k + 1 == levels.size()) {
        EXPECT_TRUE(t.at("parent").is_null());
      } else {
        const int p = t.at("parent").get<int>();
        EXPECT_GE(p, 0);
        EXPECT_LT(p, static_cast<int>(levels[k + 1].size()));
      }
    }
  }
  ASSERT_EQ(app::cmd_export(ckpt, "text", 3, {}, txt), 0);
  std::istringstream in(txt.str());
  int topics = 0;
  for (std::string line; std::getline(in, line); ++topics) EXPECT_NE(line.find("[L"), std::string::npos);
  EXPECT_EQ(topics, static_cast<int>(levels[0].size() + levels[1].size()));
  EXPECT_THROW(app::cmd_export(ckpt, "yaml", 3, {}, out), PreconditionError);
  app::CommonOptions to_dir;
  to_dir.out_dir = dir_ / "export";
  ASSERT_EQ(app::cmd_export(ckpt, "text", 3, to_dir, out), 0);
  EXPECT_EQ(read_file(dir_ / "export" / "taxonomy.txt"), txt.str());
}

TEST_F(Cli, SampleIsSeededAndUsesTheVocabulary) {
  ASSERT_EQ(train("run", 1), 0);
  const fs::path ckpt = dir_ / "run" / "checkpoint.json";
  app::CommonOptions seeded;
  seeded.seed = 3;
  std::ostringstream a, b, c;
  ASSERT_EQ(app::cmd_sample(ckpt, 12, 4, seeded, a), 0);
  app::cmd_sample(ckpt, 12, 4, seeded, b);
  seeded.seed = 4;
  app::cmd_sample(ckpt, 12, 4, seeded, c);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
  const auto vocab = json::parse(read_file(dir_ / "corpus" / "vocab.json"));
  const std::string words = vocab.dump();
  std::istringstream in(a.str());
  int docs = 0;
  for (std::string line; std::getline(in, line); ++docs) {
    std::istringstream w(line);
    int n = 0;
    for (std::string word; w >> word; ++n) EXPECT_NE(words.find('"' + word + '"'), std::string::npos) << word;
    EXPECT_EQ(n, 12);
  }
  EXPECT_EQ(docs, 4);
  EXPECT_THROW(app::cmd_sample(ckpt, 0, 1, seeded, a), PreconditionError);
}

int run_tool(const std::string& args, std::string* output = nullptr) {
  TempDir dir;
  const std::string cmd = std::string(BOXTAX_EXE) + " " + args + " > " + (dir / "out.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = read_file(dir / "out.txt");
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Executable, ExitCodesAndMessages) {
  std::string out;
  EXPECT_EQ(run_tool("--help", &out), 0);
  for (const char* sub : {"preprocess", "train", "eval", "export", "sample"}) {
    EXPECT_NE(out.find(sub), std::string::npos) << sub;
  }
  EXPECT_NE(run_tool("frobnicate"), 0);
  EXPECT_NE(run_tool("train"), 0);  // --corpus is required

  TempDir dir;
  std::ofstream(dir / "empty.txt").close();
  EXPECT_EQ(run_tool("preprocess " + (dir / "empty.txt").string() + " --out-dir " + (dir / "c").string(), &out), 1);
  EXPECT_NE(out.find("error: empty corpus"), std::string::npos) << out;
}

}  // namespace
}  // namespace boxtax
