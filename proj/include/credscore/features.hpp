#ifndef CREDSCORE_FEATURES_HPP
#define CREDSCORE_FEATURES_HPP

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "credscore/lda.hpp"
#include "credscore/lexicon.hpp"

namespace credscore {

inline constexpr int kKeywordsPerTopic = 10;
inline constexpr int kImageCols = kKeywordsPerTopic + 1;

// keywords[k] = top_keywords(model, k, kKeywordsPerTopic)
using KeywordGrid = std::vector<std::vector<std::string>>;
KeywordGrid keyword_grid(const TopicModel& model);

struct CompanyFeatures {
  std::string company_id;
  std::int64_t data1 = 0;            // mentioning articles
  std::vector<double> data2;         // K, dominant-topic histogram
  std::vector<std::int64_t> data3;   // K x 10 keyword occurrence totals, row-major

  int num_topics() const { return static_cast<int>(data2.size()); }
  std::int64_t keyword_count(int k, int j) const { return data3[k * kKeywordsPerTopic + j]; }
  // Throws Error(Errc::invalid_argument) when an invariant is broken.
  void validate() const;

  bool operator==(const CompanyFeatures&) const = default;
};

struct FeatureConfig {
  double scale = 1.0;  // multiplies data3 / data1 before tanh

  void validate() const;
};

// K x 11 grid. Column 0 holds data2, columns 1..10 hold tanh(scale * data3 / data1).
class FeatureImage {
 public:
  FeatureImage() = default;
  FeatureImage(int rows, int cols) : rows_(rows), cols_(cols),
      pixels_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& at(int r, int c) { return pixels_[static_cast<std::size_t>(r * cols_ + c)]; }
  double at(int r, int c) const { return pixels_[static_cast<std::size_t>(r * cols_ + c)]; }
  std::span<const double> pixels() const { return pixels_; }
  std::span<double> pixels() { return pixels_; }

  bool operator==(const FeatureImage&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> pixels_;
};

// docs: document indices of the articles mentioning the company; bags must
// be the documents the model was fitted on. Throws Error(Errc::zero_mention)
// for an empty docs list.
CompanyFeatures aggregate_company(const std::string& company_id, std::span<const std::size_t> docs,
                                  const TopicModel& model, const KeywordGrid& keywords,
                                  std::span<const BagOfWords> bags);

FeatureImage construct_image(const CompanyFeatures& f, const FeatureConfig& cfg);

// Binary PGM (P5), maxval 255, byte = floor(value * 255) clamped to [0, 255].
void write_pgm(std::ostream& os, const FeatureImage& img);
void export_pgm(const FeatureImage& img, const std::filesystem::path& path);

// Affine rescale of arbitrary values onto [0, 1]; a constant grid maps to 0.
FeatureImage rescale_to_unit(const FeatureImage& values);

// Feature dump: "company_id,data1,data2[0..K),data3 row-major", one company
// per line, doubles printed with 17 significant digits so reload is exact.
void write_features_csv(std::ostream& os, std::span<const CompanyFeatures> features);
std::vector<CompanyFeatures> read_features_csv(std::istream& is, int num_topics);

}  // namespace credscore

#endif
