#include "doctest.h"

#include <fstream>
#include <sstream>

#include "credscore/cli.hpp"
#include "credscore/error.hpp"
#include "credscore/pipeline.hpp"

using namespace credscore;
using namespace credscore::pipeline;

namespace {

const char* kSmallConfig = R"([lda]
topics = 6
iterations = 20

[network]
filters = 2
widths = 8,8,6,6,6,4

[train]
epochs = 5

[verify]
window = 20
folds = 3

[synth]
topics = 6
vocab_size = 120
docs = 600
companies = 80
rated = 30
evaluations = 90
investigated = 40
)";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "credscore.ini";
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("config file parsing") {
  auto cfg = default_config();
  std::istringstream in(kSmallConfig);
  apply_config_text(cfg, in, "/base");
  CHECK(cfg.lda.num_topics == 6);
  CHECK(cfg.lda.alpha == 50.0 / 6.0);
  CHECK(cfg.network.image_rows == 6);
  CHECK(cfg.network.widths == std::array<int, 6>{8, 8, 6, 6, 6, 4});
  CHECK(cfg.train.epochs == 5);
  CHECK(cfg.verify.folds == 3);
  CHECK(cfg.synth.n_companies == 80);

  SUBCASE("explicit alpha survives a topics change in either order") {
    auto a = default_config();
    std::istringstream t("[lda]\nalpha = 0.5\ntopics = 4\n");
    apply_config_text(a, t, {});
    CHECK(a.lda.alpha == 0.5);
    CHECK(a.lda.num_topics == 4);
    set_value(a, "lda.topics", "5");
    CHECK(a.lda.alpha == 0.5);
  }
  SUBCASE("relative paths resolve against the config directory") {
    auto a = default_config();
    std::istringstream t("[paths]\nlexicon = data/lex.txt\narticles = /abs/a.jsonl\n");
    apply_config_text(a, t, "/etc/cs");
    CHECK(a.lexicon == fs::path("/etc/cs/data/lex.txt"));
    CHECK(a.articles == fs::path("/abs/a.jsonl"));
  }
  SUBCASE("errors name the key path") {
    auto expect_key = [](const std::string& text, const std::string& key) {
      auto a = default_config();
      std::istringstream t(text);
      try {
        apply_config_text(a, t, {});
        FAIL("expected config error for " << key);
      } catch (const Error& e) {
        CHECK(e.code() == Errc::config);
        CHECK(std::string(e.what()).find(key) != std::string::npos);
      }
    };
    expect_key("[lda]\ntopcs = 3\n", "lda.topcs");
    expect_key("[train]\nepochs = many\n", "train.epochs");
    expect_key("[train]\nlearning_rate = -1\n", "train.learning_rate");
    expect_key("[network]\nwidths = 1,2,3\n", "network.widths");
    expect_key("[bogus]\nx = 1\n", "bogus.x");
  }
  SUBCASE("malformed file") {
    auto a = default_config();
    std::istringstream t("[lda\ntopics=3\n");
    CHECK_THROWS_AS(apply_config_text(a, t, {}), Error);
  }
  SUBCASE("learning rate zero is accepted") {
    auto a = default_config();
    set_value(a, "train.learning_rate", "0");
    CHECK(a.train.learning_rate == 0.0);
  }
}

TEST_CASE("stage hashes follow the stage's inputs") {
  TempDir tmp("credscore_hash_test");
  auto cfg = default_config();
  std::istringstream in(kSmallConfig);
  apply_config_text(cfg, in, {});
  cfg.workdir = tmp.path / "w";
  REQUIRE(cli({"synth", "--workdir", cfg.workdir.string(), "--config",
               write_config(tmp.path, kSmallConfig).string()}).code == 0);

  const auto ingest = stage_hash(cfg, Stage::ingest);
  const auto lda = stage_hash(cfg, Stage::lda);
  const auto train = stage_hash(cfg, Stage::train);

  auto changed = cfg;
  changed.train.epochs = 6;
  CHECK(stage_hash(changed, Stage::ingest) == ingest);
  CHECK(stage_hash(changed, Stage::lda) == lda);
  CHECK(stage_hash(changed, Stage::train) != train);

  changed = cfg;
  changed.lda.iterations = 21;
  CHECK(stage_hash(changed, Stage::lda) != lda);
  CHECK(stage_hash(changed, Stage::train) != train);

  // the same input bytes under another workdir hash identically
  auto moved = cfg;
  moved.workdir = tmp.path / "elsewhere";
  fs::create_directories(moved.workdir);
  fs::copy(cfg.workdir / "synth", moved.workdir / "synth", fs::copy_options::recursive);
  CHECK(stage_hash(moved, Stage::train) == train);

  // editing an input file changes every downstream hash
  std::ofstream(moved.workdir / "synth" / "lexicon.txt", std::ios::app) << "新词\n";
  CHECK(stage_hash(moved, Stage::ingest) != ingest);
  CHECK(stage_hash(moved, Stage::train) != train);
}

TEST_CASE("cli end to end") {
  TempDir tmp("credscore_cli_test");
  const auto config = write_config(tmp.path, kSmallConfig).string();
  const auto work = (tmp.path / "w").string();
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.end(), {"--config", config, "--workdir", work});
    return cli(args);
  };

  SUBCASE("rank before train names the missing checkpoint") {
    REQUIRE(run({"synth"}).code == 0);
    const auto r = run({"rank"});
    CHECK(r.code == 1);
    CHECK(r.err.find("train.v1.ckpt") != std::string::npos);
    CHECK(r.err.find("train") != std::string::npos);
    const auto l = run({"lda"});
    CHECK(l.code == 1);
    CHECK(l.err.find("ingest") != std::string::npos);
  }

  SUBCASE("full chain, idempotence and hash checks") {
    REQUIRE(run({"synth"}).code == 0);
    for (const char* stage : {"ingest", "lda", "featurize", "train", "rank", "verify"}) {
      const auto r = run({stage});
      INFO(stage << ": " << r.err);
      REQUIRE(r.code == 0);
      CHECK(r.out.rfind(std::string(stage) + ":", 0) == 0);
      CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
    }
    const auto art = artifacts(work);
    for (const auto& p : {art.ingest, art.lda, art.keywords, art.features, art.checkpoint, art.loss, art.weights,
                          art.ranking, art.report}) {
      CHECK(fs::exists(p));
    }
    CHECK_FALSE(fs::exists(fs::path(work) / ".credscore.lock"));

    const auto ranking = slurp(art.ranking);
    CHECK(ranking.rfind("# credscore rank v1 config_hash=", 0) == 0);
    CHECK(std::count(ranking.begin(), ranking.end(), '\n') == 1 + 80);

    // rerunning a stage reproduces its bytes
    std::map<fs::path, std::string> before;
    for (const auto& p : {art.ingest, art.lda, art.features, art.checkpoint, art.ranking, art.report}) before[p] = slurp(p);
    for (const char* stage : {"ingest", "lda", "featurize", "train", "rank", "verify"}) REQUIRE(run({stage}).code == 0);
    for (const auto& [p, bytes] : before) CHECK(slurp(p) == bytes);

    // a changed training config makes rank refuse the old checkpoint
    const auto refused = run({"rank", "--set", "train.epochs=6"});
    CHECK(refused.code == 1);
    CHECK(refused.err.find("hash_mismatch") != std::string::npos);
    CHECK(run({"rank", "--set", "train.epochs=6", "--force"}).code == 0);

    // `run` executes the whole chain
    CHECK(run({"run"}).code == 0);
    CHECK(slurp(art.report) == before[art.report]);

    // featurize --pgm exports one image per company
    CHECK(run({"featurize", "--pgm"}).code == 0);
    std::size_t images = 0;
    for (const auto& e : fs::directory_iterator(art.images)) images += e.path().extension() == ".pgm";
    CHECK(images == 80);
  }

  SUBCASE("lock held by another command") {
    fs::create_directories(work);
    std::ofstream(fs::path(work) / ".credscore.lock") << "";
    const auto r = run({"synth"});
    CHECK(r.code == 1);
    CHECK(r.err.find("locked") != std::string::npos);
  }
}

TEST_CASE("cli flags and exit codes") {
  TempDir tmp("credscore_cli_flags");
  const auto work = (tmp.path / "w").string();

  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"--help"}).code == 0);

  const auto bad_key = cli({"ingest", "--workdir", work, "--set", "lda.nope=1"});
  CHECK(bad_key.code == 1);
  CHECK(bad_key.err.find("lda.nope") != std::string::npos);

  const auto bad_cfg = write_config(tmp.path, "[train]\nepochs = x\n");
  const auto r = cli({"ingest", "--workdir", work, "--config", bad_cfg.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("train.epochs") != std::string::npos);

  const auto missing_inputs = cli({"ingest", "--workdir", work});
  CHECK(missing_inputs.code == 1);
  CHECK(missing_inputs.err.find("lexicon") != std::string::npos);

  const auto g = cli({"gradcheck", "--workdir", work, "--triples", "3", "--set", "lda.topics=4", "--set",
                      "network.widths=6,6,5,5,5,3"});
  CHECK(g.code == 0);
  CHECK(g.out.find("max relative error") != std::string::npos);
  CHECK(g.out.find(": ok") != std::string::npos);
}

TEST_CASE("seed and workdir precedence") {
  TempDir tmp("credscore_precedence");
  const auto cfg_path = write_config(tmp.path, "[paths]\nworkdir = from_file\n[train]\nseed = 5\n");
  const auto out_a = tmp.path / "a";
  // --workdir beats the file; --seed beats file seeds
  auto r = cli({"synth", "--config", cfg_path.string(), "--workdir", out_a.string(), "--seed", "9", "--set",
                "synth.companies=20", "--set", "synth.rated=5", "--set", "synth.evaluations=10", "--set",
                "synth.investigated=5", "--set", "synth.docs=100"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out_a / "synth" / "articles.jsonl"));
  CHECK_FALSE(fs::exists(tmp.path / "from_file"));

  auto cfg = default_config();
  apply_config_file(cfg, cfg_path);
  CHECK(cfg.workdir == tmp.path / "from_file");
  CHECK(cfg.train.seed == 5);
  override_seed(cfg, 9);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.lda.seed == 9);
  CHECK(cfg.synth.seed == 9);
}
