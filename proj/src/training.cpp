#include "credscore/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "credscore/binary_io.hpp"
#include "credscore/error.hpp"
#include "credscore/random.hpp"

namespace credscore {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

RatingSet load_ratings_impl(std::istream& in, const std::set<std::string>* known) {
  std::map<std::string, double> sums;
  RatingSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto where = [&] { return "ratings line " + std::to_string(lineno) + ": "; };
    const auto fields = split_commas(line);
    if (fields.size() != 3) {
      throw Error(Errc::parse, where() + "expected company_id,rater_id,raw_score", lineno);
    }
    const auto& id = fields[0];
    if (id.empty()) throw Error(Errc::parse, where() + "empty company id", lineno);
    if (known && !known->contains(id)) {
      throw Error(Errc::unknown_id, where() + "unknown company id '" + id + "'", lineno);
    }
    char* end = nullptr;
    const double score = std::strtod(fields[2].c_str(), &end);
    if (fields[2].empty() || end != fields[2].c_str() + fields[2].size() || !std::isfinite(score)) {
      throw Error(Errc::parse, where() + "non-numeric score '" + fields[2] + "'", lineno);
    }
    sums[id] += score;
    ++set.provenance[id];
  }
  if (in.bad()) throw Error(Errc::io, "failed reading ratings stream");
  if (sums.empty()) throw Error(Errc::degenerate_normalization, "ratings: no rows");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto& [id, sum] : sums) {
    sum /= set.provenance[id];
    lo = std::min(lo, sum);
    hi = std::max(hi, sum);
  }
  if (!(hi > lo)) {
    throw Error(Errc::degenerate_normalization, "ratings: every company has the same mean score");
  }
  for (const auto& [id, mean] : sums) set.ratings[id] = (mean - lo) / (hi - lo);
  return set;
}

}  // namespace

RatingSet load_ratings(std::istream& in, const std::set<std::string>& known_company_ids) {
  return load_ratings_impl(in, &known_company_ids);
}

RatingSet load_ratings(std::istream& in) { return load_ratings_impl(in, nullptr); }

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(Errc::invalid_argument, "train: epochs must be >= 1");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::invalid_argument, "train: learning_rate must be >= 0");
  }
  if (!(holdout_fraction >= 0 && holdout_fraction < 1)) {
    throw Error(Errc::invalid_argument, "train: holdout_fraction must be in [0, 1)");
  }
}

std::vector<Example> make_examples(std::span<const CompanyFeatures> features,
                                   const FeatureConfig& cfg) {
  cfg.validate();
  std::vector<Example> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back({f.company_id, construct_image(f, cfg), f.data1});
  return out;
}

double normalize_data1(std::int64_t data1, std::int64_t reference) {
  const double ref = std::log1p(static_cast<double>(std::max<std::int64_t>(reference, 1)));
  return std::clamp(std::log1p(static_cast<double>(std::max<std::int64_t>(data1, 0))) / ref, 0.0, 1.0);
}

double ScoringModel::score(const Example& e) const {
  return forward(params, e.image, normalize_data1(e.data1, data1_reference)).score;
}

TrainResult train(std::span<const Example> examples, const TargetMap& targets,
                  const NetworkHyper& hyper, const TrainConfig& cfg) {
  cfg.validate();
  hyper.validate();
  if (targets.size() < 2) throw Error(Errc::invalid_argument, "train: need at least 2 targets");

  std::map<std::string, const Example*> by_id;
  for (const auto& e : examples) by_id.emplace(e.company_id, &e);
  for (const auto& [id, t] : targets) {
    if (!by_id.contains(id)) throw Error(Errc::unknown_id, "train: no features for target '" + id + "'");
    if (!(t >= 0.0 && t <= 1.0)) throw Error(Errc::invalid_argument, "train: target for '" + id + "' outside [0,1]");
  }

  TrainResult result;
  std::vector<std::string> ids;
  for (const auto& [id, _] : targets) ids.push_back(id);
  const auto n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(ids.size())));
  if (n_hold > 0) {
    // separate stream from the epoch shuffles, so a run on the retained ids
    // alone replays the same updates
    Rng split_rng(cfg.seed ^ 0x5bd1e9955bd1e995ULL);
    auto shuffled = ids;
    shuffle(shuffled.begin(), shuffled.end(), split_rng);
    result.holdout_ids.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::sort(result.holdout_ids.begin(), result.holdout_ids.end());
    std::erase_if(ids, [&](const std::string& id) {
      return std::binary_search(result.holdout_ids.begin(), result.holdout_ids.end(), id);
    });
  }
  result.train_ids = ids;

  struct Sample {
    const Example* example;
    double data1_norm;
    double target;
  };
  std::int64_t reference = 1;
  for (const auto& id : ids) reference = std::max(reference, by_id[id]->data1);
  std::vector<Sample> samples;
  samples.reserve(ids.size());
  for (const auto& id : ids) {
    const auto* e = by_id[id];
    samples.push_back({e, normalize_data1(e->data1, reference), targets.at(id)});
  }

  ScoringModel& model = result.model;
  model.data1_reference = reference;
  model.params = init_params(hyper);
  auto param_tensors = model.params.tensors();

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> losses(samples.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const auto& s = samples[i];
      const auto fwd = forward(model.params, s.example->image, s.data1_norm);
      losses[i] = loss(fwd.score, s.target);
      if (cfg.learning_rate == 0.0) continue;
      const auto g = backward(model.params, fwd.trace, s.example->image, s.data1_norm, s.target);
      const auto grad_tensors = g.params.tensors();
      for (std::size_t t = 0; t < param_tensors.size(); ++t) {
        auto p = param_tensors[t];
        const auto d = grad_tensors[t];
        for (std::size_t j = 0; j < p.size(); ++j) p[j] -= cfg.learning_rate * d[j];
      }
    }
    // summed in id order so the mean does not depend on the shuffle
    const double total = std::accumulate(losses.begin(), losses.end(), 0.0);
    result.loss_history.push_back(total / static_cast<double>(samples.size()));
  }
  return result;
}

Ranking::Ranking(std::vector<RankEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const RankEntry& a, const RankEntry& b) {
    return a.score != b.score ? a.score > b.score : a.company_id < b.company_id;
  });
  std::vector<const std::string*> ids;
  for (const auto& e : entries_) ids.push_back(&e.company_id);
  std::sort(ids.begin(), ids.end(), [](auto* a, auto* b) { return *a < *b; });
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (*ids[i] == *ids[i - 1]) throw Error(Errc::duplicate_key, "ranking: duplicate company '" + *ids[i] + "'");
  }
}

Ranking predict_all(const ScoringModel& model, std::span<const Example> examples) {
  std::vector<RankEntry> entries;
  entries.reserve(examples.size());
  for (const auto& e : examples) entries.push_back({e.company_id, model.score(e)});
  return Ranking(std::move(entries));
}

void write_ranking_csv(std::ostream& os, const Ranking& ranking) {
  char buf[32];
  std::size_t rank = 0;
  for (const auto& e : ranking.entries()) {
    std::snprintf(buf, sizeof buf, "%.6f", e.score);
    os << ++rank << ',' << e.company_id << ',' << buf << '\n';
  }
}

void write_loss_history(std::ostream& os, std::span<const double> losses) {
  char buf[32];
  for (double v : losses) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << '\n';
  }
}

namespace {
constexpr char kCkptMagic[9] = "CSCKPT01";
constexpr std::uint32_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(std::ostream& os, const ScoringModel& model, std::uint64_t tag) {
  binary::write_magic(os, kCkptMagic, kCkptVersion);
  binary::write_u64(os, tag);
  binary::write_u64(os, static_cast<std::uint64_t>(model.data1_reference));
  save_params(os, model.params);
}

ScoringModel load_checkpoint(std::istream& is, std::uint64_t* tag) {
  binary::expect_magic(is, kCkptMagic, kCkptVersion);
  const auto stored = binary::read_u64(is);
  if (tag) *tag = stored;
  ScoringModel m;
  m.data1_reference = static_cast<std::int64_t>(binary::read_u64(is));
  if (m.data1_reference < 1) throw Error(Errc::format, "checkpoint has invalid data1 reference");
  m.params = load_params(is);
  return m;
}

}  // namespace credscore
