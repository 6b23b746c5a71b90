#include "credscore/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "credscore/error.hpp"
#include "credscore/random.hpp"

namespace credscore {

std::vector<InvestigationRecord> load_investigations(std::istream& in,
                                                     const std::set<std::string>& known) {
  std::vector<InvestigationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto where = [&] { return "investigations line " + std::to_string(lineno) + ": "; };
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw Error(Errc::parse, where() + "expected company_id,date", lineno);
    }
    InvestigationRecord r;
    r.company_id = line.substr(0, comma);
    if (!known.contains(r.company_id)) {
      throw Error(Errc::unknown_id, where() + "unknown company id '" + r.company_id + "'", lineno);
    }
    try {
      r.date = parse_date(std::string_view(line).substr(comma + 1));
    } catch (const Error& e) {
      throw Error(Errc::parse, where() + e.what(), lineno);
    }
    out.push_back(std::move(r));
  }
  if (in.bad()) throw Error(Errc::io, "failed reading investigations stream");
  return out;
}

TargetMap build_negative_targets(std::span<const InvestigationRecord> records,
                                 std::span<const Company> companies,
                                 std::optional<DateWindow> window) {
  std::set<std::string> known;
  for (const auto& c : companies) known.insert(c.id);
  std::map<std::string, int> counts;
  for (const auto& r : records) {
    if (!known.contains(r.company_id)) {
      throw Error(Errc::unknown_id, "investigation for unknown company '" + r.company_id + "'");
    }
    if (window && !window->contains(r.date)) continue;
    ++counts[r.company_id];
  }
  TargetMap out;
  if (counts.empty()) return out;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end(),
                                            [](auto& a, auto& b) { return a.second < b.second; });
  const int min = lo->second;
  const int max = hi->second;
  if (min == max) {
    throw Error(Errc::degenerate_normalization,
                "investigations: every investigated company has the same count");
  }
  for (const auto& [id, c] : counts) {
    out[id] = static_cast<double>(c - min) / static_cast<double>(max - min);
  }
  return out;
}

namespace {

// Position (0-based) of each shared company in each ranking, with the
// rankings first restricted to the shared companies.
struct SharedRanks {
  std::vector<std::string> ids;  // in order of a
  std::vector<std::size_t> in_a;
  std::vector<std::size_t> in_b;
};

SharedRanks shared_ranks(const Ranking& a, const Ranking& b) {
  std::unordered_map<std::string, std::size_t> b_pos;
  {
    std::set<std::string> a_ids;
    for (const auto& e : a.entries()) a_ids.insert(e.company_id);
    std::size_t p = 0;
    for (const auto& e : b.entries()) {
      if (a_ids.contains(e.company_id)) b_pos.emplace(e.company_id, p++);
    }
  }
  SharedRanks s;
  std::size_t p = 0;
  for (const auto& e : a.entries()) {
    auto it = b_pos.find(e.company_id);
    if (it == b_pos.end()) continue;
    s.ids.push_back(e.company_id);
    s.in_a.push_back(p++);
    s.in_b.push_back(it->second);
  }
  return s;
}

}  // namespace

double rank_agreement(const Ranking& pos, const Ranking& neg, int window,
                      const std::set<std::string>* subset) {
  if (window < 0) throw Error(Errc::invalid_argument, "rank_agreement: window must be >= 0");
  const auto s = shared_ranks(pos, neg);
  if (s.ids.empty()) throw Error(Errc::disjoint_sets, "rank_agreement: rankings share no companies");
  const auto n = static_cast<long long>(s.ids.size());
  std::size_t counted = 0;
  std::size_t within = 0;
  for (std::size_t i = 0; i < s.ids.size(); ++i) {
    if (subset && !subset->contains(s.ids[i])) continue;
    const long long pos_reversed = n - static_cast<long long>(s.in_a[i]);
    const long long neg_rank = static_cast<long long>(s.in_b[i]) + 1;
    ++counted;
    if (std::llabs(pos_reversed - neg_rank) <= window) ++within;
  }
  if (counted == 0) {
    throw Error(Errc::disjoint_sets, "rank_agreement: no evaluated company is in both rankings");
  }
  return static_cast<double>(within) / static_cast<double>(counted);
}

double uniform_rank_agreement(std::size_t n, int window) {
  if (n == 0) return 0.0;
  const auto N = static_cast<double>(n);
  const auto w = static_cast<double>(std::min<std::size_t>(static_cast<std::size_t>(std::max(window, 0)), n - 1));
  // pairs (i, j) in [1, n]^2 with |i - j| <= w
  const double pairs = N + 2.0 * (w * N - w * (w + 1.0) / 2.0);
  return pairs / (N * N);
}

double spearman(const Ranking& a, const Ranking& b) {
  const auto s = shared_ranks(a, b);
  const auto n = static_cast<double>(s.ids.size());
  if (s.ids.size() < 2) throw Error(Errc::disjoint_sets, "spearman: fewer than 2 shared companies");
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < s.ids.size(); ++i) {
    const double d = static_cast<double>(s.in_a[i]) - static_cast<double>(s.in_b[i]);
    sum_d2 += d * d;
  }
  return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
}

CrossValidationReport cross_validate(std::span<const Example> examples, const TargetMap& ratings,
                                     const TargetMap& negative, const CrossValidationConfig& cv,
                                     const NetworkHyper& hyper, const TrainConfig& train_cfg) {
  if (cv.folds < 2) throw Error(Errc::invalid_argument, "cross_validate: folds must be >= 2");
  if (static_cast<std::size_t>(cv.folds) > ratings.size()) {
    throw Error(Errc::invalid_argument, "cross_validate: " + std::to_string(cv.folds) +
                                            " folds but only " + std::to_string(ratings.size()) +
                                            " labeled companies");
  }
  std::vector<std::string> labeled;
  for (const auto& [id, _] : ratings) labeled.push_back(id);
  Rng rng(cv.seed);
  shuffle(labeled.begin(), labeled.end(), rng);

  CrossValidationReport report;
  report.folds = cv.folds;
  report.window = cv.window;
  report.companies = examples.size();

  for (int fold = 0; fold < cv.folds; ++fold) {
    std::set<std::string> held;
    for (std::size_t i = static_cast<std::size_t>(fold); i < labeled.size(); i += static_cast<std::size_t>(cv.folds)) {
      held.insert(labeled[i]);
    }
    TargetMap pos_targets;
    for (const auto& [id, t] : ratings) {
      if (!held.contains(id)) pos_targets.emplace(id, t);
    }
    TargetMap neg_targets;
    for (const auto& [id, t] : negative) {
      if (!held.contains(id)) neg_targets.emplace(id, t);
    }
    const auto pos_model = train(examples, pos_targets, hyper, train_cfg).model;
    const auto neg_model = train(examples, neg_targets, hyper, train_cfg).model;
    const auto pos = predict_all(pos_model, examples);
    const auto neg = predict_all(neg_model, examples);

    FoldResult r;
    r.held_out.assign(held.begin(), held.end());
    r.agreement = rank_agreement(pos, neg, cv.window, &held);
    r.spearman = spearman(pos, neg);
    report.fold_results.push_back(std::move(r));
  }
  for (const auto& f : report.fold_results) {
    report.mean_agreement += f.agreement;
    report.mean_spearman += f.spearman;
  }
  report.mean_agreement /= cv.folds;
  report.mean_spearman /= cv.folds;
  return report;
}

void write_report(std::ostream& os, const CrossValidationReport& r) {
  char buf[64];
  auto fixed = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  os << "window=" << r.window << '\n';
  os << "folds=" << r.folds << '\n';
  os << "companies=" << r.companies << '\n';
  for (std::size_t i = 0; i < r.fold_results.size(); ++i) {
    const auto& f = r.fold_results[i];
    const auto key = "fold." + std::to_string(i + 1) + ".";
    os << key << "held_out=" << f.held_out.size() << '\n';
    os << key << "agreement=" << fixed(f.agreement) << '\n';
    os << key << "spearman=" << fixed(f.spearman) << '\n';
  }
  os << "mean_agreement=" << fixed(r.mean_agreement) << '\n';
  os << "mean_spearman=" << fixed(r.mean_spearman) << '\n';
  os << "uniform_baseline=" << fixed(uniform_rank_agreement(r.companies, r.window)) << '\n';
}

}  // namespace credscore
