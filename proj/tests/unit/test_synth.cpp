#include "doctest.h"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "credscore/error.hpp"
#include "credscore/pipeline.hpp"
#include "credscore/synth.hpp"

using namespace credscore;

namespace {

synth::SynthConfig small_world(std::uint64_t seed, double signal) {
  synth::SynthConfig c;
  c.seed = seed;
  c.n_companies = 300;
  c.n_docs = 2400;
  c.n_rated = 60;
  c.n_evaluations = 250;
  c.n_investigated = 120;
  c.signal_strength = signal;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += !line.empty() && line[0] != '#';
  return n;
}

// Average ranks (ties share the mean rank), then Pearson.
double spearman_of(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("config validation") {
  auto c = small_world(1, 1.0);
  CHECK_NOTHROW(c.validate());
  c.vocab_size = 100;  // 15 topics x 10 keywords need 150
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_world(1, 1.0);
  c.n_rated = c.n_companies + 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_world(1, 1.0);
  c.signal_strength = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_world(1, 1.0);
  c.n_topics = 2;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("same seed gives a byte-identical world") {
  const auto dir = std::filesystem::temp_directory_path() / "credscore_synth_test";
  std::filesystem::remove_all(dir);
  const auto a = synth::write_world(synth::generate(small_world(5, 1.0)), dir / "a");
  const auto b = synth::write_world(synth::generate(small_world(5, 1.0)), dir / "b");
  const auto c = synth::write_world(synth::generate(small_world(6, 1.0)), dir / "c");
  for (auto member : {&synth::WorldFiles::lexicon, &synth::WorldFiles::articles, &synth::WorldFiles::companies,
                      &synth::WorldFiles::ratings, &synth::WorldFiles::investigations,
                      &synth::WorldFiles::credibility}) {
    CHECK(slurp(a.*member) == slurp(b.*member));
  }
  CHECK(slurp(a.articles) != slurp(c.articles));
  std::filesystem::remove_all(dir);
}

TEST_CASE("default-size world: counts and loader round trip") {
  const auto world = synth::generate(synth::SynthConfig{});
  CHECK(world.companies.size() == 3065);
  CHECK(world.articles.size() == 24000);
  CHECK(world.planted_doc_topic.size() == 24000);
  CHECK(world.planted_topic_word.size() == 15);
  for (const auto& row : world.planted_topic_word) {
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  }

  const auto dir = std::filesystem::temp_directory_path() / "credscore_synth_default";
  std::filesystem::remove_all(dir);
  const auto files = synth::write_world(world, dir);
  CHECK(load_articles_file(files.articles) == world.articles);
  CHECK(load_companies_file(files.companies) == world.companies);
  CHECK(load_lexicon_file(files.lexicon).terms() == world.lexicon);
  CHECK(data_rows(slurp(files.companies)) == 3065);
  CHECK(data_rows(slurp(files.credibility)) == 3065);
  CHECK(data_rows(slurp(files.ratings)) == 1000);

  std::set<std::string> known;
  for (const auto& c : world.companies) known.insert(c.id);
  std::istringstream ratings(world.ratings_csv);
  const auto rs = load_ratings(ratings, known);
  CHECK(rs.ratings.size() == 220);

  std::istringstream inv(world.investigations_csv);
  const auto records = load_investigations(inv, known);
  std::map<std::string, int> counts;
  for (const auto& r : records) ++counts[r.company_id];
  CHECK(counts == world.planted_investigations);
  CHECK(counts.size() == 600);

  // planted anti-correlation between investigations and credibility
  std::vector<double> n, q;
  for (const auto& [id, c] : counts) {
    n.push_back(c);
    q.push_back(world.planted_credibility.at(id));
  }
  CHECK(spearman_of(n, q) <= -0.8);

  // ratings track credibility
  std::vector<double> r, rq;
  for (const auto& [id, v] : rs.ratings) {
    r.push_back(v);
    rq.push_back(world.planted_credibility.at(id));
  }
  CHECK(spearman_of(r, rq) >= 0.95);
  std::filesystem::remove_all(dir);
}

TEST_CASE("signal strength controls the tone of a company's articles") {
  for (double signal : {1.0, 0.0}) {
    const auto world = synth::generate(small_world(3, signal));
    // oracle: fraction of positive-tone tokens per company, read from the text
    std::set<std::string> positive_terms, negative_terms;
    for (std::size_t w = 0; w < world.terms.size(); ++w) {
      if (world.planted_topic_word[synth::kPositiveToneTopic][w] > 0) positive_terms.insert(world.terms[w]);
      if (world.planted_topic_word[synth::kNegativeToneTopic][w] > 0) negative_terms.insert(world.terms[w]);
    }
    std::map<std::string, std::pair<double, double>> tone;
    const auto lex = Lexicon::from_terms(world.lexicon);
    for (std::size_t d = 0; d < world.articles.size(); ++d) {
      const auto& a = world.articles[d];
      std::string subject;
      for (const auto& c : world.companies) {
        if (a.body.rfind(c.canonical_name, 0) == 0) subject = c.id;
      }
      REQUIRE_FALSE(subject.empty());
      for (const auto& [t, n] : extract_bag(a.body, lex).counts) {
        if (positive_terms.contains(t)) tone[subject].first += static_cast<double>(n);
        if (negative_terms.contains(t)) tone[subject].second += static_cast<double>(n);
      }
    }
    std::vector<double> share, q;
    for (const auto& [id, pn] : tone) {
      share.push_back(pn.first / (pn.first + pn.second));
      q.push_back(world.planted_credibility.at(id));
    }
    const double rho = spearman_of(share, q);
    if (signal == 1.0) {
      CHECK(rho >= 0.8);
    } else {
      CHECK(std::abs(rho) <= 3.0 / std::sqrt(static_cast<double>(q.size())));
    }
  }
}

TEST_CASE("null signal: out-of-sample ranking uncorrelated with planted credibility over 20 seeds") {
  auto cfg = pipeline::default_config();
  cfg.lda.iterations = 40;
  std::vector<double> rhos;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.synth = small_world(seed, 0.0);
    const auto world = synth::generate(cfg.synth);
    const auto run = pipeline::prepare_world(world, cfg);
    const auto model = train(run.examples, run.ratings, cfg.network, cfg.train).model;
    const auto ranking = predict_all(model, run.examples);
    std::vector<double> score, q;
    for (const auto& e : ranking.entries()) {
      if (run.ratings.contains(e.company_id)) continue;  // training companies are memorized
      score.push_back(e.score);
      q.push_back(world.planted_credibility.at(e.company_id));
    }
    rhos.push_back(spearman_of(score, q));
  }
  const double n = static_cast<double>(rhos.size());
  const double mean = std::accumulate(rhos.begin(), rhos.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rhos) var += (r - mean) * (r - mean);
  const double se = std::sqrt(var / (n - 1.0) / n);
  MESSAGE("mean spearman " << mean << " +- " << se);
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("planted topic corpus") {
  synth::PlantedCorpusConfig pc;
  pc.n_docs = 50;
  const auto a = synth::generate_planted_corpus(pc);
  const auto b = synth::generate_planted_corpus(pc);
  CHECK(a.docs == b.docs);
  CHECK(a.docs.size() == 50);
  for (const auto& d : a.docs) CHECK(d.total == 100);
  CHECK(a.topic_word.size() == 3);
  CHECK(a.terms.size() == 300);
}
