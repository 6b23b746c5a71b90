#include "credscore/cli.hpp"

#include <algorithm>
#include <exception>
#include <functional>
#include <optional>

#include "CLI11.hpp"

#include "credscore/error.hpp"
#include "credscore/pipeline.hpp"

namespace credscore {

namespace {

using namespace credscore::pipeline;

using Command = std::function<int(const PipelineConfig&, const CommandOptions&, std::ostream&)>;

struct Globals {
  std::string config;
  std::string workdir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  bool force = false;
};

// Precedence: built-in defaults < config file < --set key=value < --seed / --workdir.
PipelineConfig build_config(const Globals& g) {
  auto cfg = default_config();
  if (!g.config.empty()) apply_config_file(cfg, g.config);
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(Errc::config, "--set expects key=value, got '" + kv + "'");
    set_value(cfg, kv.substr(0, eq), kv.substr(eq + 1), fs::current_path());
  }
  if (g.seed) override_seed(cfg, *g.seed);
  if (!g.workdir.empty()) cfg.workdir = g.workdir;
  return cfg;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"credscore: news-based corporate credibility scoring pipeline", "credscore"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  CommandOptions opt;
  app.add_option("--config", g.config, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--workdir", g.workdir, "artifact directory (default $CREDSCORE_WORKDIR or ./credscore-work)");
  app.add_option("--seed", g.seed, "override every seed");
  app.add_option("--set", g.sets, "override a config value, e.g. --set train.epochs=50")->allow_extra_args(false);
  app.add_flag("--force", g.force, "accept artifacts produced under a different config hash");

  std::string synth_out;
  std::vector<std::pair<CLI::App*, std::vector<Command>>> commands;
  auto add = [&](const char* name, const char* help, std::vector<Command> steps) {
    auto* sub = app.add_subcommand(name, help);
    commands.emplace_back(sub, std::move(steps));
    return sub;
  };
  add("synth", "generate a synthetic world", {cmd_synth})
      ->add_option("--out", synth_out, "output directory (default <workdir>/synth)");
  add("ingest", "segment articles and detect company mentions", {cmd_ingest});
  add("lda", "fit the topic model", {cmd_lda});
  add("featurize", "build per-company feature images", {cmd_featurize})
      ->add_flag("--pgm", opt.export_images, "also export one PGM image per company");
  add("train", "train the scoring network on analyst ratings", {cmd_train});
  add("rank", "score and rank every featurized company", {cmd_rank});
  add("verify", "cross-validate against investigation records", {cmd_verify});
  add("gradcheck", "finite-difference check of the network gradients", {cmd_gradcheck})
      ->add_option("--triples", opt.gradcheck_triples, "random parameter/input triples")
      ->check(CLI::PositiveNumber);
  add("run", "ingest, lda, featurize, train, rank and verify in order",
      {cmd_ingest, cmd_lda, cmd_featurize, cmd_train, cmd_rank, cmd_verify});

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "credscore: " << e.what() << '\n';
    return 1;
  }

  try {
    const auto cfg = build_config(g);
    opt.force = g.force;
    if (!synth_out.empty()) opt.synth_out = fs::path(synth_out);
    for (const auto& [sub, steps] : commands) {
      if (!sub->parsed()) continue;
      WorkdirLock lock(cfg.workdir);
      for (const auto& step : steps) {
        if (const int rc = step(cfg, opt, out); rc != 0) return rc;
      }
    }
    return 0;
  } catch (const Error& e) {
    err << "credscore: " << errc_name(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "credscore: internal error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace credscore
