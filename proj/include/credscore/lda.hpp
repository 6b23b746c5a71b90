#ifndef CREDSCORE_LDA_HPP
#define CREDSCORE_LDA_HPP

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "credscore/lexicon.hpp"

namespace credscore {

// Dense term <-> index mapping. Indices follow UTF-8 byte order of terms.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);
  static Vocabulary from_bags(std::span<const BagOfWords> docs);

  std::size_t size() const { return terms_.size(); }
  const std::string& term(std::size_t i) const { return terms_.at(i); }
  const std::vector<std::string>& terms() const { return terms_; }
  std::optional<std::int32_t> id_of(const std::string& term) const;

  bool operator==(const Vocabulary& o) const { return terms_ == o.terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

struct GibbsConfig {
  int num_topics = 15;
  double alpha = 50.0 / 15.0;
  double beta = 0.01;
  int iterations = 200;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const GibbsConfig&) const = default;
};

// Sampler state after the final sweep. Tokens are stored flat: document d
// owns positions [doc_offsets[d], doc_offsets[d+1]) of words and z.
struct TopicModel {
  GibbsConfig config;
  Vocabulary vocab;
  std::vector<std::size_t> doc_offsets;
  std::vector<std::int32_t> words;
  std::vector<std::int32_t> z;
  std::vector<std::int32_t> n_kw;  // K x V, row-major
  std::vector<std::int32_t> n_k;   // K
  std::vector<std::int32_t> n_dk;  // D x K, row-major

  int num_topics() const { return config.num_topics; }
  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t num_docs() const { return doc_offsets.empty() ? 0 : doc_offsets.size() - 1; }
  std::size_t num_tokens() const { return words.size(); }

  std::int32_t topic_word(int k, std::size_t w) const { return n_kw[k * vocab_size() + w]; }
  std::int32_t doc_topic(std::size_t d, int k) const { return n_dk[d * num_topics() + k]; }

  // Recomputes every count from (words, z) and compares.
  bool counts_consistent() const;
  void rebuild_counts();

  bool operator==(const TopicModel&) const = default;
};

using SweepObserver = std::function<void(int sweep, const TopicModel&)>;

// Collapsed Gibbs sampling. Each bag expands to tokens in ascending
// vocabulary order; z is initialized uniformly from the seeded generator.
// Throws Error(Errc::empty_corpus) for no documents or no tokens.
TopicModel fit_lda(std::span<const BagOfWords> docs, const GibbsConfig& config,
                   const SweepObserver& observer = {});

// (n_kw + beta) / (n_k + V beta)
std::vector<double> topic_word_dist(const TopicModel& model, int k);

// Most probable terms of topic k, descending; ties to the lower vocabulary index.
std::vector<std::string> top_keywords(const TopicModel& model, int k, std::size_t n);

// argmax_k n_dk[d][k], lowest index on ties.
int dominant_topic(const TopicModel& model, std::size_t d);

// log p(w, z) with theta and phi integrated out.
double log_likelihood(const TopicModel& model);
// Same, after checking the model was fitted on docs.
double log_likelihood(const TopicModel& model, std::span<const BagOfWords> docs);

// Relabels topics: new topic perm[k] takes old topic k's counts.
TopicModel permute_topics(const TopicModel& model, std::span<const int> perm);

// Versioned little-endian dump. tag is opaque to this module (the pipeline
// stores its config hash there).
void save_topic_model(std::ostream& os, const TopicModel& model, std::uint64_t tag = 0);
TopicModel load_topic_model(std::istream& is, std::uint64_t* tag = nullptr);

}  // namespace credscore

#endif
