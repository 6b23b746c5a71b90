#ifndef CREDSCORE_SYNTH_HPP
#define CREDSCORE_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "credscore/corpus.hpp"
#include "credscore/lexicon.hpp"

namespace credscore::synth {

// Planted-topic corpus for exercising the sampler in isolation.
struct PlantedCorpusConfig {
  std::uint64_t seed = 1;
  int n_topics = 3;
  int vocab_size = 300;
  int n_docs = 500;
  int doc_length = 100;
  double doc_topic_alpha = 0.1;
  double topic_word_eta = 0.1;
};

struct PlantedCorpus {
  std::vector<std::string> terms;               // planted word index -> term
  std::vector<std::vector<double>> topic_word;  // K x V over planted word indices
  std::vector<int> doc_topic;                   // most frequent planted topic per document
  std::vector<BagOfWords> docs;
};

PlantedCorpus generate_planted_corpus(const PlantedCorpusConfig& cfg);

struct SynthConfig {
  std::uint64_t seed = 2017;
  int n_topics = 15;
  int vocab_size = 600;
  int n_docs = 24000;
  int doc_length = 40;
  int n_companies = 3065;
  int n_rated = 220;
  int n_evaluations = 1000;
  int n_investigated = 600;
  double signal_strength = 1.0;

  void validate() const;
};

// Topic 0 carries positive tone, topic 1 negative tone, the rest are
// content topics. Each article draws a content topic for most of its tokens
// and fills the remainder from the tone topics, leaning positive in
// proportion to the subject company's credibility scaled by the signal
// strength. Investigation counts fall as credibility rises.
struct SynthWorld {
  SynthConfig config;
  std::vector<std::string> terms;               // planted word index -> term
  std::vector<std::string> lexicon;             // terms plus unused distractors, sorted
  std::vector<Article> articles;
  std::vector<Company> companies;
  std::vector<std::vector<double>> planted_topic_word;
  std::vector<int> planted_doc_topic;
  std::map<std::string, double> planted_credibility;
  std::map<std::string, int> planted_investigations;
  std::string ratings_csv;
  std::string investigations_csv;
};

inline constexpr int kPositiveToneTopic = 0;
inline constexpr int kNegativeToneTopic = 1;
inline constexpr double kToneShare = 0.5;
inline constexpr int kToneTerms = 10;

SynthWorld generate(const SynthConfig& cfg);

struct WorldFiles {
  std::filesystem::path lexicon;
  std::filesystem::path articles;
  std::filesystem::path companies;
  std::filesystem::path ratings;
  std::filesystem::path investigations;
  std::filesystem::path credibility;
};

WorldFiles world_files(const std::filesystem::path& dir);
WorldFiles write_world(const SynthWorld& world, const std::filesystem::path& dir);

}  // namespace credscore::synth

#endif
