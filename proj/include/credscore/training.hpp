#ifndef CREDSCORE_TRAINING_HPP
#define CREDSCORE_TRAINING_HPP

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "credscore/features.hpp"
#include "credscore/network.hpp"

namespace credscore {

// company id -> supervision target in [0, 1]
using TargetMap = std::map<std::string, double>;

struct RatingSet {
  TargetMap ratings;
  std::map<std::string, int> provenance;  // raw evaluations per company
};

// Rows "company_id,rater_id,raw_score"; '#' lines are comments. Each
// company's rating is the mean of its raw scores, min-max normalized over
// the loaded companies.
RatingSet load_ratings(std::istream& in, const std::set<std::string>& known_company_ids);
RatingSet load_ratings(std::istream& in);

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.1;
  std::uint64_t seed = 11;
  bool shuffle = true;
  double holdout_fraction = 0.0;

  void validate() const;
};

struct Example {
  std::string company_id;
  FeatureImage image;
  std::int64_t data1 = 1;
};

std::vector<Example> make_examples(std::span<const CompanyFeatures> features,
                                   const FeatureConfig& cfg);

// log(1 + data1) / log(1 + reference), clamped to [0, 1].
double normalize_data1(std::int64_t data1, std::int64_t reference);

// Trained network plus the data1 scale it was trained against.
struct ScoringModel {
  NetworkParams params;
  std::int64_t data1_reference = 1;

  double score(const Example& e) const;
  bool operator==(const ScoringModel&) const = default;
};

struct TrainResult {
  ScoringModel model;
  std::vector<double> loss_history;  // mean pre-update loss per epoch
  std::vector<std::string> train_ids;
  std::vector<std::string> holdout_ids;
};

// Per-example SGD on (score - target)^2. Examples without a target are
// ignored; a target without an example throws Error(Errc::unknown_id).
TrainResult train(std::span<const Example> examples, const TargetMap& targets,
                  const NetworkHyper& hyper, const TrainConfig& cfg);

struct RankEntry {
  std::string company_id;
  double score = 0.0;
  bool operator==(const RankEntry&) const = default;
};

// Sorted by score descending, then company id ascending.
class Ranking {
 public:
  Ranking() = default;
  explicit Ranking(std::vector<RankEntry> entries);

  const std::vector<RankEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool operator==(const Ranking&) const = default;

 private:
  std::vector<RankEntry> entries_;
};

Ranking predict_all(const ScoringModel& model, std::span<const Example> examples);

// "rank,company_id,score" with six decimals, rank starting at 1.
void write_ranking_csv(std::ostream& os, const Ranking& ranking);
void write_loss_history(std::ostream& os, std::span<const double> losses);

void save_checkpoint(std::ostream& os, const ScoringModel& model, std::uint64_t tag = 0);
ScoringModel load_checkpoint(std::istream& is, std::uint64_t* tag = nullptr);

}  // namespace credscore

#endif
