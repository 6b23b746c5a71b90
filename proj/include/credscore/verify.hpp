#ifndef CREDSCORE_VERIFY_HPP
#define CREDSCORE_VERIFY_HPP

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "credscore/corpus.hpp"
#include "credscore/training.hpp"

namespace credscore {

struct InvestigationRecord {
  std::string company_id;
  Date date;
  bool operator==(const InvestigationRecord&) const = default;
};

// Rows "company_id,date"; '#' lines are comments.
std::vector<InvestigationRecord> load_investigations(std::istream& in,
                                                     const std::set<std::string>& known_company_ids);

struct DateWindow {
  Date first;
  Date last;
  bool contains(Date d) const { return first <= d && d <= last; }
};

// Per-company record count inside the window, min-max normalized over the
// companies with at least one record. Higher means more investigated.
// Companies without records are absent from the result.
TargetMap build_negative_targets(std::span<const InvestigationRecord> records,
                                 std::span<const Company> companies,
                                 std::optional<DateWindow> window = std::nullopt);

// Fraction of companies whose rank in neg (1 = most investigated) is within
// `window` of their rank in pos read bottom-up (1 = least credible). Ranks
// are taken over the companies the two rankings share; when `subset` is
// given only those companies are counted.
double rank_agreement(const Ranking& pos, const Ranking& neg, int window,
                      const std::set<std::string>* subset = nullptr);

// Expected rank_agreement for two independent uniformly random rankings of n.
double uniform_rank_agreement(std::size_t n, int window);

// Spearman rank correlation over the shared companies.
double spearman(const Ranking& a, const Ranking& b);

struct CrossValidationConfig {
  int folds = 5;
  int window = 200;
  std::uint64_t seed = 13;
};

struct FoldResult {
  std::vector<std::string> held_out;
  double agreement = 0.0;
  double spearman = 0.0;
};

struct CrossValidationReport {
  int folds = 0;
  int window = 0;
  std::size_t companies = 0;
  std::vector<FoldResult> fold_results;
  double mean_agreement = 0.0;
  double mean_spearman = 0.0;
};

// k-fold split of the rated companies. Each fold trains the credibility
// model on the other folds' ratings and the investigation model on the
// negative targets minus the held-out companies, ranks every example with
// both, and scores agreement on the held-out companies.
CrossValidationReport cross_validate(std::span<const Example> examples, const TargetMap& ratings,
                                     const TargetMap& negative, const CrossValidationConfig& cv,
                                     const NetworkHyper& hyper, const TrainConfig& train_cfg);

void write_report(std::ostream& os, const CrossValidationReport& report);

}  // namespace credscore

#endif
