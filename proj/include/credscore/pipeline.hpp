#ifndef CREDSCORE_PIPELINE_HPP
#define CREDSCORE_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "credscore/corpus.hpp"
#include "credscore/features.hpp"
#include "credscore/lda.hpp"
#include "credscore/lexicon.hpp"
#include "credscore/network.hpp"
#include "credscore/synth.hpp"
#include "credscore/training.hpp"
#include "credscore/verify.hpp"

namespace credscore::pipeline {

namespace fs = std::filesystem;

// Empty input paths default to the files `credscore synth` writes under
// <workdir>/synth.
struct PipelineConfig {
  fs::path workdir;
  fs::path lexicon;
  fs::path articles;
  fs::path companies;
  fs::path ratings;
  fs::path investigations;
  GibbsConfig lda;
  FeatureConfig features;
  NetworkHyper network;  // image_rows follows lda.num_topics
  TrainConfig train;
  CrossValidationConfig verify;
  synth::SynthConfig synth;
};

PipelineConfig default_config();

// INI-style text: [section] headers and key = value lines. Relative paths
// are resolved against base_dir. Unknown keys and bad values throw
// Error(Errc::config) naming the "section.key" path.
void apply_config_text(PipelineConfig& cfg, std::istream& in, const fs::path& base_dir);
void apply_config_file(PipelineConfig& cfg, const fs::path& path);
void set_value(PipelineConfig& cfg, const std::string& key_path, const std::string& value,
               const fs::path& base_dir = {});
// Sets every seed (lda, network, train, verify, synth).
void override_seed(PipelineConfig& cfg, std::uint64_t seed);
// Canonical "section.key=value" listing; paths excluded.
std::string describe(const PipelineConfig& cfg);

struct InputPaths {
  fs::path lexicon, articles, companies, ratings, investigations;
};
InputPaths resolve_inputs(const PipelineConfig& cfg);

// Config hash per stage; each covers the stage's own settings, its input
// file contents, and every upstream stage's hash.
enum class Stage { ingest, lda, featurize, train, rank, verify };
const char* stage_name(Stage s);
std::uint64_t stage_hash(const PipelineConfig& cfg, Stage s);
std::string hex_hash(std::uint64_t h);

// Artifact file names inside the workdir.
struct Artifacts {
  fs::path ingest, lda, keywords, features, images, checkpoint, loss, weights, ranking, report;
};
Artifacts artifacts(const fs::path& workdir);

// In-memory stage bodies, shared by the commands and the test suites.
struct IngestResult {
  std::vector<std::string> article_ids;
  std::vector<BagOfWords> bags;
  std::vector<std::string> company_ids;
  MentionIndex mentions;
  std::optional<DateWindow> window;
};
IngestResult ingest(const Lexicon& lex, std::span<const Article> articles,
                    std::span<const Company> companies);
// Companies with no mentioning article are skipped; output sorted by id.
std::vector<CompanyFeatures> featurize(const IngestResult& in, const TopicModel& model);
// Keeps only targets that have features.
TargetMap restrict_targets(const TargetMap& targets, std::span<const Example> examples);

struct WorldRun {
  IngestResult ingest;
  TopicModel model;
  std::vector<Example> examples;
  TargetMap ratings;
  TargetMap negative;
};
// Runs ingest, topic fitting and featurization on a generated world.
WorldRun prepare_world(const synth::SynthWorld& world, const PipelineConfig& cfg);

struct GradCheckSummary {
  int triples = 0;
  double max_relative_error = 0.0;
  std::string worst_tensor;
};
// Random parameters (nonzero biases), pixels, data1 and targets per triple.
GradCheckSummary random_gradient_check(const NetworkHyper& hyper, int triples, std::uint64_t seed);

struct CommandOptions {
  bool force = false;
  bool export_images = false;
  std::optional<fs::path> synth_out;
  int gradcheck_triples = 10;
  double gradcheck_tolerance = 1e-4;
};

// Each command prints a one-line summary to out and returns 0, or throws.
// cmd_gradcheck returns 1 when the tolerance is exceeded.
int cmd_synth(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out);
int cmd_ingest(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out);
int cmd_lda(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out);
int cmd_featurize(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out);
int cmd_train(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out);
int cmd_rank(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out);
int cmd_verify(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out);
int cmd_gradcheck(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out);

// Exclusive per-workdir lock held for the lifetime of the object.
class WorkdirLock {
 public:
  explicit WorkdirLock(const fs::path& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  fs::path path_;
};

}  // namespace credscore::pipeline

#endif
