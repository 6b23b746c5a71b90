#include "credscore/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "credscore/error.hpp"

namespace credscore {

KeywordGrid keyword_grid(const TopicModel& model) {
  KeywordGrid grid;
  grid.reserve(static_cast<std::size_t>(model.num_topics()));
  for (int k = 0; k < model.num_topics(); ++k) {
    grid.push_back(top_keywords(model, k, kKeywordsPerTopic));
  }
  return grid;
}

void CompanyFeatures::validate() const {
  const auto K = data2.size();
  if (data1 < 1) throw Error(Errc::invalid_argument, company_id + ": data1 must be >= 1");
  if (K == 0 || data3.size() != K * kKeywordsPerTopic) {
    throw Error(Errc::shape_mismatch, company_id + ": data2/data3 shapes disagree");
  }
  double sum = 0.0;
  for (double v : data2) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::invalid_argument, company_id + ": data2 entry outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::invalid_argument, company_id + ": data2 does not sum to 1");
  for (auto c : data3) {
    if (c < 0) throw Error(Errc::invalid_argument, company_id + ": negative data3 entry");
  }
}

void FeatureConfig::validate() const {
  if (!(scale > 0) || !std::isfinite(scale)) {
    throw Error(Errc::invalid_argument, "features: scale must be a positive finite number");
  }
}

CompanyFeatures aggregate_company(const std::string& company_id, std::span<const std::size_t> docs,
                                  const TopicModel& model, const KeywordGrid& keywords,
                                  std::span<const BagOfWords> bags) {
  if (docs.empty()) throw Error(Errc::zero_mention, company_id + ": no mentioning articles");
  const int K = model.num_topics();
  if (static_cast<int>(keywords.size()) != K) {
    throw Error(Errc::shape_mismatch, "keyword grid has wrong topic count");
  }
  if (bags.size() != model.num_docs()) {
    throw Error(Errc::shape_mismatch, "bags do not match the fitted documents");
  }

  CompanyFeatures f;
  f.company_id = company_id;
  f.data1 = static_cast<std::int64_t>(docs.size());
  std::vector<std::int64_t> dominant(static_cast<std::size_t>(K), 0);
  f.data3.assign(static_cast<std::size_t>(K) * kKeywordsPerTopic, 0);

  for (auto d : docs) {
    ++dominant[static_cast<std::size_t>(dominant_topic(model, d))];
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < kKeywordsPerTopic; ++j) {
        f.data3[static_cast<std::size_t>(k * kKeywordsPerTopic + j)] +=
            bags[d].count(keywords[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]);
      }
    }
  }
  f.data2.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    f.data2[k] = static_cast<double>(dominant[k]) / static_cast<double>(f.data1);
  }
  return f;
}

FeatureImage construct_image(const CompanyFeatures& f, const FeatureConfig& cfg) {
  // tanh rounds to 1.0 for arguments above ~19; keep the block strictly below 1
  static const double below_one = std::nextafter(1.0, 0.0);
  const int K = f.num_topics();
  FeatureImage img(K, kImageCols);
  const auto n = static_cast<double>(f.data1);
  for (int k = 0; k < K; ++k) {
    img.at(k, 0) = f.data2[k];
    for (int j = 0; j < kKeywordsPerTopic; ++j) {
      // per-article rate first: exact under replication of the article set
      const double rate = static_cast<double>(f.keyword_count(k, j)) / n;
      img.at(k, j + 1) = std::min(std::tanh(cfg.scale * rate), below_one);
    }
  }
  return img;
}

void write_pgm(std::ostream& os, const FeatureImage& img) {
  os << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::string bytes;
  bytes.reserve(img.pixels().size());
  for (double v : img.pixels()) {
    const double scaled = std::floor(v * 255.0);
    const double clamped = std::clamp(std::isnan(scaled) ? 0.0 : scaled, 0.0, 255.0);
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(clamped)));
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void export_pgm(const FeatureImage& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  write_pgm(os, img);
  os.flush();
  if (!os) throw Error(Errc::io, "failed writing " + path.string());
}

FeatureImage rescale_to_unit(const FeatureImage& values) {
  FeatureImage out(values.rows(), values.cols());
  const auto px = values.pixels();
  if (px.empty()) return out;
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  const double range = *hi - *lo;
  auto dst = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    dst[i] = range > 0 ? (px[i] - *lo) / range : 0.0;
  }
  return out;
}

void write_features_csv(std::ostream& os, std::span<const CompanyFeatures> features) {
  char buf[32];
  for (const auto& f : features) {
    os << f.company_id << ',' << f.data1;
    for (double v : f.data2) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    for (auto c : f.data3) os << ',' << c;
    os << '\n';
  }
}

std::vector<CompanyFeatures> read_features_csv(std::istream& is, int num_topics) {
  std::vector<CompanyFeatures> out;
  const auto K = static_cast<std::size_t>(num_topics);
  const std::size_t expected = 2 + K + K * kKeywordsPerTopic;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    auto fail = [&](const std::string& why) {
      return Error(Errc::parse, "features line " + std::to_string(lineno) + ": " + why, lineno);
    };
    if (fields.size() != expected) {
      throw fail("expected " + std::to_string(expected) + " fields, got " +
                 std::to_string(fields.size()));
    }
    auto to_int = [&](std::string_view s) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) throw fail("bad integer '" + std::string(s) + "'");
      return v;
    };
    auto to_double = [&](std::string_view s) {
      const std::string tmp(s);
      char* end = nullptr;
      const double v = std::strtod(tmp.c_str(), &end);
      if (tmp.empty() || end != tmp.c_str() + tmp.size()) throw fail("bad number '" + tmp + "'");
      return v;
    };
    CompanyFeatures f;
    f.company_id = std::string(fields[0]);
    f.data1 = to_int(fields[1]);
    for (std::size_t k = 0; k < K; ++k) f.data2.push_back(to_double(fields[2 + k]));
    for (std::size_t i = 0; i < K * kKeywordsPerTopic; ++i) f.data3.push_back(to_int(fields[2 + K + i]));
    try {
      f.validate();
    } catch (const Error& e) {
      throw fail(e.what());
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace credscore
