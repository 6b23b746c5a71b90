#include "credscore/lda.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "credscore/binary_io.hpp"
#include "credscore/error.hpp"
#include "credscore/random.hpp"

namespace credscore {

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!ids_.emplace(terms_[i], static_cast<std::int32_t>(i)).second) {
      throw Error(Errc::duplicate_key, "duplicate vocabulary term '" + terms_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::from_bags(std::span<const BagOfWords> docs) {
  std::map<std::string, int> seen;
  for (const auto& bag : docs) {
    for (const auto& [term, count] : bag.counts) {
      if (count > 0) seen.emplace(term, 0);
    }
  }
  std::vector<std::string> terms;
  terms.reserve(seen.size());
  for (auto& [t, _] : seen) terms.push_back(t);
  return Vocabulary(std::move(terms));
}

std::optional<std::int32_t> Vocabulary::id_of(const std::string& term) const {
  auto it = ids_.find(term);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void GibbsConfig::validate() const {
  if (num_topics < 2) throw Error(Errc::invalid_argument, "lda: topic count must be >= 2");
  if (!(alpha > 0) || !std::isfinite(alpha)) throw Error(Errc::invalid_argument, "lda: alpha must be > 0");
  if (!(beta > 0) || !std::isfinite(beta)) throw Error(Errc::invalid_argument, "lda: beta must be > 0");
  if (iterations < 1) throw Error(Errc::invalid_argument, "lda: iterations must be >= 1");
}

void TopicModel::rebuild_counts() {
  const auto K = static_cast<std::size_t>(num_topics());
  const auto V = vocab_size();
  const auto D = num_docs();
  n_kw.assign(K * V, 0);
  n_k.assign(K, 0);
  n_dk.assign(D * K, 0);
  for (std::size_t d = 0; d < D; ++d) {
    for (auto i = doc_offsets[d]; i < doc_offsets[d + 1]; ++i) {
      const auto k = static_cast<std::size_t>(z[i]);
      ++n_kw[k * V + static_cast<std::size_t>(words[i])];
      ++n_k[k];
      ++n_dk[d * K + k];
    }
  }
}

bool TopicModel::counts_consistent() const {
  TopicModel copy = *this;
  copy.rebuild_counts();
  return copy.n_kw == n_kw && copy.n_k == n_k && copy.n_dk == n_dk;
}

TopicModel fit_lda(std::span<const BagOfWords> docs, const GibbsConfig& config,
                   const SweepObserver& observer) {
  config.validate();
  if (docs.empty()) throw Error(Errc::empty_corpus, "lda: no documents");

  TopicModel m;
  m.config = config;
  m.vocab = Vocabulary::from_bags(docs);
  if (m.vocab.size() == 0) throw Error(Errc::empty_corpus, "lda: corpus has no tokens");

  m.doc_offsets.reserve(docs.size() + 1);
  m.doc_offsets.push_back(0);
  for (const auto& bag : docs) {
    // bag.counts iterates in byte order, which is vocabulary order
    for (const auto& [term, count] : bag.counts) {
      const auto w = *m.vocab.id_of(term);
      m.words.insert(m.words.end(), static_cast<std::size_t>(count), w);
    }
    m.doc_offsets.push_back(m.words.size());
  }

  const int K = config.num_topics;
  const auto V = m.vocab.size();
  Rng rng(config.seed);
  m.z.resize(m.words.size());
  for (auto& zi : m.z) zi = static_cast<std::int32_t>(uniform_index(rng, static_cast<std::uint64_t>(K)));
  m.rebuild_counts();

  const double alpha = config.alpha;
  const double beta = config.beta;
  const double vbeta = static_cast<double>(V) * beta;
  std::vector<double> cumulative(static_cast<std::size_t>(K));

  for (int sweep = 1; sweep <= config.iterations; ++sweep) {
    for (std::size_t d = 0; d < m.num_docs(); ++d) {
      std::int32_t* ndk = &m.n_dk[d * static_cast<std::size_t>(K)];
      for (auto i = m.doc_offsets[d]; i < m.doc_offsets[d + 1]; ++i) {
        const auto w = static_cast<std::size_t>(m.words[i]);
        int k = m.z[i];
        --ndk[k];
        --m.n_kw[static_cast<std::size_t>(k) * V + w];
        --m.n_k[k];

        double total = 0.0;
        for (int t = 0; t < K; ++t) {
          total += (ndk[t] + alpha) * (m.n_kw[static_cast<std::size_t>(t) * V + w] + beta) /
                   (m.n_k[t] + vbeta);
          cumulative[t] = total;
        }
        const double u = uniform01(rng) * total;
        k = 0;
        while (k < K - 1 && cumulative[k] <= u) ++k;

        m.z[i] = k;
        ++ndk[k];
        ++m.n_kw[static_cast<std::size_t>(k) * V + w];
        ++m.n_k[k];
      }
    }
    if (observer) observer(sweep, m);
  }
  return m;
}

std::vector<double> topic_word_dist(const TopicModel& model, int k) {
  if (k < 0 || k >= model.num_topics()) {
    throw Error(Errc::out_of_range, "topic index " + std::to_string(k) + " out of range");
  }
  const auto V = model.vocab_size();
  const double beta = model.config.beta;
  const double denom = model.n_k[k] + static_cast<double>(V) * beta;
  std::vector<double> p(V);
  for (std::size_t w = 0; w < V; ++w) p[w] = (model.topic_word(k, w) + beta) / denom;
  return p;
}

std::vector<std::string> top_keywords(const TopicModel& model, int k, std::size_t n) {
  if (k < 0 || k >= model.num_topics()) {
    throw Error(Errc::out_of_range, "topic index " + std::to_string(k) + " out of range");
  }
  if (n > model.vocab_size()) {
    throw Error(Errc::out_of_range, "requested " + std::to_string(n) + " keywords but V = " +
                                        std::to_string(model.vocab_size()));
  }
  // Probabilities are monotone in n_kw within a topic, so rank on counts.
  std::vector<std::int32_t> order(model.vocab_size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::int32_t a, std::int32_t b) {
                      const auto ca = model.topic_word(k, static_cast<std::size_t>(a));
                      const auto cb = model.topic_word(k, static_cast<std::size_t>(b));
                      return ca != cb ? ca > cb : a < b;
                    });
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(model.vocab.term(static_cast<std::size_t>(order[i])));
  return out;
}

int dominant_topic(const TopicModel& model, std::size_t d) {
  if (d >= model.num_docs()) {
    throw Error(Errc::out_of_range, "document index " + std::to_string(d) + " out of range");
  }
  int best = 0;
  for (int k = 1; k < model.num_topics(); ++k) {
    if (model.doc_topic(d, k) > model.doc_topic(d, best)) best = k;
  }
  return best;
}

double log_likelihood(const TopicModel& model) {
  const int K = model.num_topics();
  const auto V = static_cast<double>(model.vocab_size());
  const double a = model.config.alpha;
  const double b = model.config.beta;

  double ll = 0.0;
  for (int k = 0; k < K; ++k) {
    ll += std::lgamma(V * b) - std::lgamma(model.n_k[k] + V * b);
    for (std::size_t w = 0; w < model.vocab_size(); ++w) {
      const auto c = model.topic_word(k, w);
      if (c > 0) ll += std::lgamma(c + b) - std::lgamma(b);
    }
  }
  for (std::size_t d = 0; d < model.num_docs(); ++d) {
    const auto len = static_cast<double>(model.doc_offsets[d + 1] - model.doc_offsets[d]);
    ll += std::lgamma(K * a) - std::lgamma(len + K * a);
    for (int k = 0; k < K; ++k) {
      const auto c = model.doc_topic(d, k);
      if (c > 0) ll += std::lgamma(c + a) - std::lgamma(a);
    }
  }
  return ll;
}

double log_likelihood(const TopicModel& model, std::span<const BagOfWords> docs) {
  if (docs.size() != model.num_docs()) {
    throw Error(Errc::shape_mismatch, "log_likelihood: document count differs from fitted model");
  }
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto len = model.doc_offsets[d + 1] - model.doc_offsets[d];
    if (static_cast<std::size_t>(docs[d].total) != len) {
      throw Error(Errc::shape_mismatch, "log_likelihood: token count differs for document " +
                                            std::to_string(d));
    }
  }
  return log_likelihood(model);
}

TopicModel permute_topics(const TopicModel& model, std::span<const int> perm) {
  const int K = model.num_topics();
  if (static_cast<int>(perm.size()) != K) {
    throw Error(Errc::shape_mismatch, "permutation length differs from topic count");
  }
  std::vector<char> used(static_cast<std::size_t>(K), 0);
  for (int p : perm) {
    if (p < 0 || p >= K || used[p]) throw Error(Errc::invalid_argument, "not a permutation");
    used[p] = 1;
  }
  TopicModel out = model;
  for (auto& zi : out.z) zi = perm[zi];
  out.rebuild_counts();
  return out;
}

namespace {
constexpr char kLdaMagic[9] = "CSLDAMDL";
constexpr std::uint32_t kLdaVersion = 1;
}  // namespace

void save_topic_model(std::ostream& os, const TopicModel& m, std::uint64_t tag) {
  using namespace binary;
  write_magic(os, kLdaMagic, kLdaVersion);
  write_u64(os, tag);
  write_u32(os, static_cast<std::uint32_t>(m.config.num_topics));
  write_f64(os, m.config.alpha);
  write_f64(os, m.config.beta);
  write_u32(os, static_cast<std::uint32_t>(m.config.iterations));
  write_u64(os, m.config.seed);
  write_u64(os, m.vocab.size());
  for (const auto& t : m.vocab.terms()) write_string(os, t);
  write_u64(os, m.num_docs());
  for (auto off : m.doc_offsets) write_u64(os, off);
  write_i32s(os, m.words);
  write_i32s(os, m.z);
  write_i32s(os, m.n_kw);
  write_i32s(os, m.n_k);
  write_i32s(os, m.n_dk);
  if (!os) throw Error(Errc::io, "failed writing topic model");
}

TopicModel load_topic_model(std::istream& is, std::uint64_t* tag) {
  using namespace binary;
  expect_magic(is, kLdaMagic, kLdaVersion);
  const auto stored_tag = read_u64(is);
  if (tag) *tag = stored_tag;

  TopicModel m;
  m.config.num_topics = static_cast<int>(read_u32(is));
  m.config.alpha = read_f64(is);
  m.config.beta = read_f64(is);
  m.config.iterations = static_cast<int>(read_u32(is));
  m.config.seed = read_u64(is);
  m.config.validate();

  constexpr std::uint64_t kMax = std::uint64_t{1} << 34;
  const auto V = read_u64(is);
  if (V > kMax) throw Error(Errc::format, "vocabulary size out of range");
  std::vector<std::string> terms(V);
  for (auto& t : terms) t = read_string(is);
  m.vocab = Vocabulary(std::move(terms));

  const auto D = read_u64(is);
  if (D > kMax) throw Error(Errc::format, "document count out of range");
  m.doc_offsets.resize(D + 1);
  for (auto& off : m.doc_offsets) off = read_u64(is);
  m.words = read_i32s(is, kMax);
  m.z = read_i32s(is, kMax);
  m.n_kw = read_i32s(is, kMax);
  m.n_k = read_i32s(is, kMax);
  m.n_dk = read_i32s(is, kMax);

  const auto K = static_cast<std::size_t>(m.config.num_topics);
  const bool shapes_ok = m.doc_offsets.front() == 0 && m.doc_offsets.back() == m.words.size() &&
                         std::is_sorted(m.doc_offsets.begin(), m.doc_offsets.end()) &&
                         m.z.size() == m.words.size() && m.n_kw.size() == K * V &&
                         m.n_k.size() == K && m.n_dk.size() == K * D;
  if (!shapes_ok) throw Error(Errc::format, "topic model dump has inconsistent shapes");
  for (std::size_t i = 0; i < m.words.size(); ++i) {
    if (m.words[i] < 0 || static_cast<std::uint64_t>(m.words[i]) >= V || m.z[i] < 0 ||
        static_cast<std::size_t>(m.z[i]) >= K) {
      throw Error(Errc::format, "topic model dump has out-of-range token data");
    }
  }
  if (!m.counts_consistent()) throw Error(Errc::format, "topic model counts disagree with assignments");
  return m;
}

}  // namespace credscore
