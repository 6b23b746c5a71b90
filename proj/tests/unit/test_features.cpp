#include "doctest.h"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "credscore/error.hpp"
#include "credscore/features.hpp"
#include "credscore/random.hpp"

using namespace credscore;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string pgm_of(const FeatureImage& img) {
  std::ostringstream os;
  write_pgm(os, img);
  return os.str();
}

// Model whose documents have the given per-topic token counts. Every token of
// topic k is the word "t<k>" (K <= 10).
TopicModel model_with_doc_counts(const std::vector<std::vector<int>>& per_doc, int K) {
  TopicModel m;
  m.config.num_topics = K;
  std::vector<std::string> terms;
  for (int k = 0; k < K; ++k) terms.push_back("t" + std::to_string(k));
  for (int i = 0; i < kKeywordsPerTopic; ++i) terms.push_back("u" + std::to_string(i));  // unused padding
  m.vocab = Vocabulary(terms);
  m.doc_offsets.push_back(0);
  for (const auto& counts : per_doc) {
    for (int k = 0; k < K; ++k) {
      for (int i = 0; i < counts[static_cast<std::size_t>(k)]; ++i) {
        m.words.push_back(k);
        m.z.push_back(k);
      }
    }
    m.doc_offsets.push_back(m.words.size());
  }
  m.rebuild_counts();
  return m;
}

CompanyFeatures random_features(Rng& rng, int K) {
  CompanyFeatures f;
  f.company_id = "C";
  f.data1 = 1 + static_cast<std::int64_t>(uniform_index(rng, 2000));
  std::vector<std::int64_t> hist(static_cast<std::size_t>(K), 0);
  for (std::int64_t i = 0; i < f.data1; ++i) ++hist[uniform_index(rng, static_cast<std::uint64_t>(K))];
  for (auto h : hist) f.data2.push_back(static_cast<double>(h) / static_cast<double>(f.data1));
  for (int i = 0; i < K * kKeywordsPerTopic; ++i) {
    f.data3.push_back(static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(f.data1 * 6 + 1))));
  }
  return f;
}

}  // namespace

TEST_CASE("aggregate_company") {
  SUBCASE("dominant-topic histogram") {
    // 1000 articles: 20 dominant in topic 0, 100 in topic 1, 150 in topic 2,
    // the rest in topic 3
    std::vector<std::vector<int>> docs;
    for (int i = 0; i < 1000; ++i) {
      const int k = i < 20 ? 0 : i < 120 ? 1 : i < 270 ? 2 : 3;
      std::vector<int> c(5, 1);
      c[static_cast<std::size_t>(k)] = 4;
      docs.push_back(c);
    }
    const auto m = model_with_doc_counts(docs, 5);
    std::vector<BagOfWords> bags(1000);
    std::vector<std::size_t> idx(1000);
    std::iota(idx.begin(), idx.end(), 0);
    const auto f = aggregate_company("Z", idx, m, keyword_grid(m), bags);
    CHECK(f.data1 == 1000);
    CHECK(f.data2[0] == 0.02);
    CHECK(f.data2[1] == 0.10);
    CHECK(f.data2[2] == 0.15);
    CHECK(f.data2[3] == 0.73);
    CHECK(f.data2[4] == 0.0);
    CHECK_NOTHROW(f.validate());
  }
  SUBCASE("one article with no keywords") {
    const auto m = model_with_doc_counts({{0, 3, 1}}, 3);
    std::vector<BagOfWords> bags(1);
    bags[0].add("unrelated", 5);
    const std::vector<std::size_t> idx{0};
    const auto f = aggregate_company("Z", idx, m, keyword_grid(m), bags);
    CHECK(f.data2 == std::vector<double>{0.0, 1.0, 0.0});
    CHECK(std::all_of(f.data3.begin(), f.data3.end(), [](auto v) { return v == 0; }));
  }
  SUBCASE("keyword counts summed over articles") {
    const auto m = model_with_doc_counts({{2, 1}, {1, 2}, {3, 0}}, 2);
    KeywordGrid grid(2, std::vector<std::string>(10));
    for (int j = 0; j < 10; ++j) {
      grid[0][static_cast<std::size_t>(j)] = "k0_" + std::to_string(j);
      grid[1][static_cast<std::size_t>(j)] = "k1_" + std::to_string(j);
    }
    grid[1][4] = "w";
    std::vector<BagOfWords> bags(3);
    bags[0].add("w", 6);
    bags[1].add("w", 7);
    bags[2].add("w", 100);  // not a mentioning article
    bags[1].add("k0_9", 2);
    const std::vector<std::size_t> idx{0, 1};
    const auto f = aggregate_company("Z", idx, m, grid, bags);
    CHECK(f.keyword_count(1, 4) == 13);
    CHECK(f.keyword_count(0, 9) == 2);
    CHECK(f.data1 == 2);
  }
  SUBCASE("zero mentions") {
    const auto m = model_with_doc_counts({{1, 1}}, 2);
    std::vector<BagOfWords> bags(1);
    try {
      aggregate_company("Z", {}, m, keyword_grid(m), bags);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::zero_mention);
    }
  }
}

TEST_CASE("construct_image") {
  CompanyFeatures f;
  f.company_id = "C";
  f.data1 = 5;
  f.data2 = {0.2, 0.8};
  f.data3.assign(20, 0);
  f.data3[3] = 5;    // equals data1
  f.data3[12] = 11;
  const auto img = construct_image(f, FeatureConfig{});
  CHECK(img.rows() == 2);
  CHECK(img.cols() == 11);
  CHECK(img.at(0, 0) == 0.2);
  CHECK(img.at(1, 0) == 0.8);
  CHECK(img.at(0, 4) == doctest::Approx(0.76159).epsilon(1e-5));
  CHECK(img.at(0, 4) == std::tanh(1.0));
  CHECK(img.at(1, 3) == std::tanh(11.0 / 5.0));
  CHECK(img.at(0, 1) == 0.0);

  FeatureConfig half;
  half.scale = 0.5;
  CHECK(construct_image(f, half).at(1, 3) == std::tanh(0.5 * 11.0 / 5.0));
  FeatureConfig bad;
  bad.scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);

  // monotone in each data3 cell
  auto g = f;
  for (int v = 0; v < 40; ++v) {
    g.data3[7] = v;
    const double before = construct_image(g, FeatureConfig{}).at(0, 8);
    g.data3[7] = v + 1;
    CHECK(construct_image(g, FeatureConfig{}).at(0, 8) > before);
  }
}

TEST_CASE("replicating every article leaves the image bit-identical") {
  const auto m = model_with_doc_counts({{3, 1, 0}, {0, 2, 2}, {1, 1, 5}, {4, 0, 0}}, 3);
  std::vector<BagOfWords> bags(4);
  const auto grid = keyword_grid(m);
  for (std::size_t d = 0; d < 4; ++d) {
    for (int k = 0; k < 3; ++k) bags[d].add(grid[static_cast<std::size_t>(k)][0], static_cast<std::int64_t>(d + k));
  }
  const std::vector<std::size_t> once{0, 1, 2};
  const auto base = construct_image(aggregate_company("Z", once, m, grid, bags), FeatureConfig{});
  for (int rep = 2; rep <= 7; ++rep) {
    std::vector<std::size_t> many;
    for (int r = 0; r < rep; ++r) many.insert(many.end(), once.begin(), once.end());
    const auto f = aggregate_company("Z", many, m, grid, bags);
    CHECK(f.data1 == 3 * rep);
    CHECK(construct_image(f, FeatureConfig{}) == base);
  }
}

TEST_CASE("image ranges over random features") {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto f = random_features(rng, 6);
    const auto img = construct_image(f, FeatureConfig{});
    double col0 = 0.0;
    for (int r = 0; r < img.rows(); ++r) {
      col0 += img.at(r, 0);
      for (int c = 1; c < img.cols(); ++c) {
        CHECK(img.at(r, c) >= 0.0);
        CHECK(img.at(r, c) < 1.0);
      }
    }
    CHECK(std::abs(col0 - 1.0) <= 1e-9);
  }
}

TEST_CASE("saturated keyword rates stay below one") {
  CompanyFeatures f;
  f.company_id = "S";
  f.data1 = 1;
  f.data2 = {1.0, 0.0};
  f.data3.assign(20, 0);
  f.data3[0] = 40;
  f.data3[1] = 1000000;
  const auto img = construct_image(f, FeatureConfig{});
  CHECK(std::tanh(40.0) == 1.0);
  CHECK(img.at(0, 1) < 1.0);
  CHECK(img.at(0, 1) == std::nextafter(1.0, 0.0));
  CHECK(img.at(0, 2) == img.at(0, 1));
  CHECK(img.at(1, 1) == 0.0);
  std::ostringstream os;
  write_pgm(os, img);
  CHECK(static_cast<unsigned char>(os.str()[os.str().size() - 22 + 1]) == 254);
}

TEST_CASE("pgm export") {
  SUBCASE("all-zero image") {
    const auto bytes = pgm_of(FeatureImage(15, 11));
    const std::string header = "P5\n11 15\n255\n";
    REQUIRE(bytes.size() == header.size() + 165);
    CHECK(bytes.substr(0, header.size()) == header);
    CHECK(bytes.substr(header.size()) == std::string(165, '\0'));
    CHECK(bytes == read_bytes(std::filesystem::path(CREDSCORE_GOLDEN_DIR) / "zero.pgm"));
  }
  SUBCASE("byte values") {
    FeatureImage img(1, 11);
    img.at(0, 0) = 1.0;
    img.at(0, 1) = std::tanh(1.0);
    img.at(0, 2) = 0.5;
    img.at(0, 3) = 1.5;   // clamped
    img.at(0, 4) = -0.2;  // clamped
    img.at(0, 5) = 254.999 / 255.0;
    const auto bytes = pgm_of(img);
    const auto px = bytes.substr(bytes.size() - 11);
    CHECK(static_cast<unsigned char>(px[0]) == 255);
    CHECK(static_cast<unsigned char>(px[1]) == 194);
    CHECK(static_cast<unsigned char>(px[2]) == 127);
    CHECK(static_cast<unsigned char>(px[3]) == 255);
    CHECK(static_cast<unsigned char>(px[4]) == 0);
    CHECK(static_cast<unsigned char>(px[5]) == 254);
  }
  SUBCASE("golden fixture") {
    CompanyFeatures f;
    f.company_id = "fixture";
    f.data1 = 4;
    f.data2 = {0.125, 0.375, 0.5, 0.0};
    for (int k = 0; k < 4; ++k) {
      for (int j = 0; j < 10; ++j) f.data3.push_back((3 * k + 2 * j) % 9);
    }
    FeatureConfig cfg;
    cfg.scale = 0.5;
    const auto golden = read_bytes(std::filesystem::path(CREDSCORE_GOLDEN_DIR) / "fixture.pgm");
    CHECK(pgm_of(construct_image(f, cfg)) == golden);

    const auto path = std::filesystem::temp_directory_path() / "credscore_fixture_test.pgm";
    export_pgm(construct_image(f, cfg), path);
    CHECK(read_bytes(path) == golden);
    std::filesystem::remove(path);
  }
}

TEST_CASE("rescale_to_unit") {
  FeatureImage v(1, 3);
  v.at(0, 0) = -2.0;
  v.at(0, 1) = 0.0;
  v.at(0, 2) = 2.0;
  const auto u = rescale_to_unit(v);
  CHECK(u.at(0, 0) == 0.0);
  CHECK(u.at(0, 1) == 0.5);
  CHECK(u.at(0, 2) == 1.0);
  FeatureImage flat(2, 2);
  for (auto& x : flat.pixels()) x = 3.0;
  const auto scaled = rescale_to_unit(flat);
  for (double x : scaled.pixels()) CHECK(x == 0.0);
}

TEST_CASE("features csv round trip") {
  Rng rng(9);
  std::vector<CompanyFeatures> fs;
  for (int i = 0; i < 20; ++i) {
    auto f = random_features(rng, 4);
    f.company_id = "C" + std::to_string(100 + i);
    fs.push_back(f);
  }
  std::stringstream ss;
  write_features_csv(ss, fs);
  CHECK(read_features_csv(ss, 4) == fs);

  std::istringstream wrong_k(ss.str());
  CHECK_THROWS_AS(read_features_csv(wrong_k, 5), Error);
}

TEST_CASE("validate rejects broken invariants") {
  Rng rng(1);
  auto f = random_features(rng, 3);
  CHECK_NOTHROW(f.validate());
  auto g = f;
  g.data1 = 0;
  CHECK_THROWS_AS(g.validate(), Error);
  g = f;
  g.data2[0] += 0.01;
  CHECK_THROWS_AS(g.validate(), Error);
  g = f;
  g.data3[2] = -1;
  CHECK_THROWS_AS(g.validate(), Error);
}
