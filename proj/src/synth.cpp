#include "credscore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "credscore/error.hpp"
#include "credscore/random.hpp"
#include "credscore/utf8.hpp"

namespace credscore::synth {

namespace {

// Disjoint codepoint blocks keep terms, names and aliases from ever
// matching across one another.
constexpr char32_t kTermBase = 0x4E00;
constexpr char32_t kTermSpan = 0x1000;
constexpr char32_t kNameBase = 0x5E00;
constexpr char32_t kNameSpan = 0x0800;
constexpr char32_t kAliasBase = 0x6600;
constexpr char32_t kAliasSpan = 0x0800;
constexpr const char* kSeparator = "\xEF\xBC\x8C";  // U+FF0C
constexpr const char* kStop = "\xE3\x80\x82";       // U+3002
constexpr const char* kOpenBracket = "\xE3\x80\x90";  // U+3010
constexpr const char* kCloseBracket = "\xE3\x80\x91";  // U+3011
constexpr double kSecondMentionRate = 0.05;
constexpr int kDistractorTerms = 50;
constexpr double kToneConcentration = 20.0;

std::vector<std::string> unique_strings(Rng& rng, std::size_t count, char32_t base, char32_t span,
                                        int min_len, int max_len) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  out.reserve(count);
  while (out.size() < count) {
    const int len = min_len + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(max_len - min_len + 1)));
    std::u32string s;
    for (int i = 0; i < len; ++i) s.push_back(base + static_cast<char32_t>(uniform_index(rng, span)));
    auto enc = utf8::encode(s);
    if (seen.insert(enc).second) out.push_back(std::move(enc));
  }
  return out;
}

std::vector<double> dirichlet(Rng& rng, std::size_t n, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) {
    x = gamma(rng);
    sum += x;
  }
  if (sum <= 0.0) {
    // every draw underflowed; fall back to a point mass
    std::fill(v.begin(), v.end(), 0.0);
    v[uniform_index(rng, n)] = 1.0;
    return v;
  }
  for (auto& x : v) x /= sum;
  return v;
}

class Categorical {
 public:
  explicit Categorical(const std::vector<double>& weights) : cumulative_(weights.size()) {
    std::partial_sum(weights.begin(), weights.end(), cumulative_.begin());
  }
  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string numbered(char prefix, int width, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, n);
  return buf;
}

Date random_date(Rng& rng) {
  using namespace std::chrono;
  // news window: 2017-01-01 .. 2017-09-30
  const sys_days first = year{2017} / January / 1;
  const sys_days last = year{2017} / September / 30;
  const auto span = static_cast<std::uint64_t>((last - first).count() + 1);
  return year_month_day{first + days{static_cast<int>(uniform_index(rng, span))}};
}

}  // namespace

PlantedCorpus generate_planted_corpus(const PlantedCorpusConfig& cfg) {
  if (cfg.n_topics < 1 || cfg.vocab_size < 1 || cfg.n_docs < 1 || cfg.doc_length < 1) {
    throw Error(Errc::invalid_argument, "planted corpus: counts must be positive");
  }
  Rng rng(cfg.seed);
  PlantedCorpus c;
  c.terms = unique_strings(rng, static_cast<std::size_t>(cfg.vocab_size), kTermBase, kTermSpan, 2, 3);
  std::vector<Categorical> topics;
  for (int k = 0; k < cfg.n_topics; ++k) {
    c.topic_word.push_back(dirichlet(rng, static_cast<std::size_t>(cfg.vocab_size), cfg.topic_word_eta));
    topics.emplace_back(c.topic_word.back());
  }
  for (int d = 0; d < cfg.n_docs; ++d) {
    const Categorical mixture(dirichlet(rng, static_cast<std::size_t>(cfg.n_topics), cfg.doc_topic_alpha));
    std::vector<int> per_topic(static_cast<std::size_t>(cfg.n_topics), 0);
    BagOfWords bag;
    for (int i = 0; i < cfg.doc_length; ++i) {
      const auto k = mixture(rng);
      ++per_topic[k];
      bag.add(c.terms[topics[k](rng)]);
    }
    c.doc_topic.push_back(static_cast<int>(std::max_element(per_topic.begin(), per_topic.end()) - per_topic.begin()));
    c.docs.push_back(std::move(bag));
  }
  return c;
}

void SynthConfig::validate() const {
  if (n_topics < 3) throw Error(Errc::invalid_argument, "synth: need at least 3 topics (two tone topics)");
  if (vocab_size < 1 || n_docs < 1 || doc_length < 1 || n_companies < 1 || n_rated < 1 ||
      n_evaluations < 1 || n_investigated < 1) {
    throw Error(Errc::invalid_argument, "synth: counts must be positive");
  }
  if (vocab_size < n_topics * 10) {
    throw Error(Errc::invalid_argument, "synth: vocab_size " + std::to_string(vocab_size) +
                                            " too small for " + std::to_string(n_topics) +
                                            " topics x 10 keywords");
  }
  if (n_rated > n_companies) throw Error(Errc::invalid_argument, "synth: n_rated exceeds n_companies");
  if (n_investigated > n_companies) throw Error(Errc::invalid_argument, "synth: n_investigated exceeds n_companies");
  if (n_evaluations < n_rated) throw Error(Errc::invalid_argument, "synth: fewer evaluations than rated companies");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
    throw Error(Errc::invalid_argument, "synth: signal_strength must be in [0, 1]");
  }
}

SynthWorld generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SynthWorld w;
  w.config = cfg;
  const auto K = static_cast<std::size_t>(cfg.n_topics);
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  const auto C = static_cast<std::size_t>(cfg.n_companies);
  const double s = cfg.signal_strength;

  // 1. lexicon
  auto all_terms = unique_strings(rng, V + kDistractorTerms, kTermBase, kTermSpan, 2, 3);
  w.terms.assign(all_terms.begin(), all_terms.begin() + static_cast<std::ptrdiff_t>(V));
  w.lexicon = all_terms;
  std::sort(w.lexicon.begin(), w.lexicon.end());

  // 2. companies and credibility
  const auto names = unique_strings(rng, C, kNameBase, kNameSpan, 4, 4);
  const auto aliases = unique_strings(rng, C, kAliasBase, kAliasSpan, 3, 3);
  std::vector<double> credibility(C);
  for (std::size_t c = 0; c < C; ++c) {
    w.companies.push_back({numbered('C', 5, c + 1), names[c], {aliases[c]}});
    credibility[c] = uniform01(rng);
    w.planted_credibility[w.companies[c].id] = credibility[c];
  }

  // 3. topics: each tone topic is a near-flat distribution over its own
  // kToneTerms terms;
  // content topics are sparse over the remaining vocabulary
  const auto tone_terms = static_cast<std::size_t>(kToneTerms);
  std::vector<Categorical> topic_sampler;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> dist(V, 0.0);
    if (k == kPositiveToneTopic || k == kNegativeToneTopic) {
      const auto tone = dirichlet(rng, tone_terms, kToneConcentration);
      std::copy(tone.begin(), tone.end(), dist.begin() + static_cast<std::ptrdiff_t>(k * tone_terms));
    } else {
      const auto content = dirichlet(rng, V - 2 * tone_terms, 0.05);
      std::copy(content.begin(), content.end(), dist.begin() + static_cast<std::ptrdiff_t>(2 * tone_terms));
    }
    w.planted_topic_word.push_back(std::move(dist));
    topic_sampler.emplace_back(w.planted_topic_word.back());
  }

  // 4. article subjects: one article per company first, the rest weighted
  // by credibility at the configured strength
  std::vector<std::size_t> subject;
  std::vector<std::size_t> first_pass(C);
  std::iota(first_pass.begin(), first_pass.end(), 0);
  shuffle(first_pass.begin(), first_pass.end(), rng);
  for (std::size_t i = 0; i < C && subject.size() < static_cast<std::size_t>(cfg.n_docs); ++i) {
    subject.push_back(first_pass[i]);
  }
  std::vector<double> weight(C);
  for (std::size_t c = 0; c < C; ++c) weight[c] = 1.0 + 0.5 * s * (2.0 * credibility[c] - 1.0);
  const Categorical by_weight(weight);
  while (subject.size() < static_cast<std::size_t>(cfg.n_docs)) subject.push_back(by_weight(rng));
  shuffle(subject.begin(), subject.end(), rng);

  // 5. article text
  for (std::size_t d = 0; d < subject.size(); ++d) {
    const auto c = subject[d];
    const auto& company = w.companies[c];
    const int content = 2 + static_cast<int>(uniform_index(rng, K - 2));
    const double positive = 0.5 + s * (credibility[c] - 0.5);

    Article a;
    a.id = numbered('A', 6, d + 1);
    a.date = random_date(rng);
    const bool alias_title = uniform01(rng) < 0.3;
    a.title = std::string(kOpenBracket) + (alias_title ? company.aliases.front() : company.canonical_name) +
              kCloseBracket;

    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(cfg.doc_length) + 1);
    for (int i = 0; i < cfg.doc_length; ++i) {
      std::size_t k = static_cast<std::size_t>(content);
      if (uniform01(rng) < kToneShare) {
        k = uniform01(rng) < positive ? kPositiveToneTopic : kNegativeToneTopic;
      }
      tokens.push_back(w.terms[topic_sampler[k](rng)]);
    }
    if (uniform01(rng) < kSecondMentionRate && C > 1) {
      auto other = static_cast<std::size_t>(uniform_index(rng, C - 1));
      if (other >= c) ++other;
      const auto at = static_cast<std::size_t>(uniform_index(rng, tokens.size() + 1));
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), w.companies[other].canonical_name);
    }
    a.body = company.canonical_name;
    for (const auto& t : tokens) a.body += kSeparator + t;
    a.body += kStop;

    w.planted_doc_topic.push_back(content);
    w.articles.push_back(std::move(a));
  }

  // 6. ratings: 1 to 5 scale, mean over evaluations tracks credibility
  std::vector<char> mentioned(C, 0);
  for (auto c : subject) mentioned[c] = 1;
  std::vector<std::size_t> candidates;
  for (std::size_t c = 0; c < C; ++c) {
    if (mentioned[c]) candidates.push_back(c);
  }
  shuffle(candidates.begin(), candidates.end(), rng);
  const auto n_rated = std::min(candidates.size(), static_cast<std::size_t>(cfg.n_rated));
  std::vector<std::size_t> rated(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_rated));
  std::sort(rated.begin(), rated.end());
  std::vector<std::size_t> evaluations(rated);
  while (evaluations.size() < static_cast<std::size_t>(cfg.n_evaluations) && !rated.empty()) {
    evaluations.push_back(rated[uniform_index(rng, rated.size())]);
  }
  std::sort(evaluations.begin(), evaluations.end());
  std::ostringstream ratings;
  ratings << "# company_id,rater_id,raw_score\n";
  for (std::size_t i = 0; i < evaluations.size(); ++i) {
    const auto c = evaluations[i];
    const double noisy = std::clamp(credibility[c] + (uniform01(rng) - 0.5) * 0.1, 0.0, 1.0);
    ratings << w.companies[c].id << ',' << numbered('R', 4, 1 + uniform_index(rng, 300)) << ','
            << fixed(1.0 + 4.0 * noisy, 4) << '\n';
  }
  w.ratings_csv = ratings.str();

  // 7. investigations: between 1 and 10 per investigated company, more for
  // less credible companies
  shuffle(candidates.begin(), candidates.end(), rng);
  const auto n_inv = std::min(candidates.size(), static_cast<std::size_t>(cfg.n_investigated));
  std::vector<std::size_t> investigated(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_inv));
  std::sort(investigated.begin(), investigated.end());
  std::ostringstream inv;
  inv << "# company_id,date\n";
  for (auto c : investigated) {
    const int count = 1 + static_cast<int>(std::lround(9.0 * (1.0 - credibility[c])));
    w.planted_investigations[w.companies[c].id] = count;
    std::vector<Date> dates;
    for (int i = 0; i < count; ++i) dates.push_back(random_date(rng));
    std::sort(dates.begin(), dates.end());
    for (auto d : dates) inv << w.companies[c].id << ',' << format_date(d) << '\n';
  }
  w.investigations_csv = inv.str();
  return w;
}

WorldFiles world_files(const std::filesystem::path& dir) {
  return {dir / "lexicon.txt",     dir / "articles.jsonl",       dir / "companies.csv",
          dir / "ratings.csv",     dir / "investigations.csv",   dir / "planted_credibility.csv"};
}

WorldFiles write_world(const SynthWorld& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto files = world_files(dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(Errc::io, "cannot write " + p.string());
    return os;
  };
  {
    auto os = open(files.lexicon);
    for (const auto& t : w.lexicon) os << t << '\n';
  }
  {
    auto os = open(files.articles);
    write_articles(os, w.articles);
  }
  {
    auto os = open(files.companies);
    write_companies(os, w.companies);
  }
  open(files.ratings) << w.ratings_csv;
  open(files.investigations) << w.investigations_csv;
  {
    auto os = open(files.credibility);
    os << "# company_id,planted_credibility\n";
    for (const auto& [id, q] : w.planted_credibility) os << id << ',' << fixed(q, 6) << '\n';
  }
  return files;
}

}  // namespace credscore::synth
