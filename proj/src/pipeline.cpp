#include "credscore/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <unordered_map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include "credscore/error.hpp"
#include "credscore/random.hpp"

namespace credscore::pipeline {

namespace {

constexpr const char* kDefaultWorkdir = "credscore-work";
constexpr const char* kWorkdirEnv = "CREDSCORE_WORKDIR";

// ---- value parsing -------------------------------------------------------

Error bad_value(const std::string& key, const std::string& value, const std::string& why) {
  return Error(Errc::config, key + ": invalid value '" + value + "' (" + why + ")");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& raw) {
  const auto v = trim(raw);
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) throw bad_value(key, raw, "expected an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& raw) {
  const auto v = trim(raw);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) throw bad_value(key, raw, "expected a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const auto v = trim(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw bad_value(key, raw, "expected true or false");
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value,
                                  const fs::path& base)>;

fs::path resolve_path(const std::string& raw, const fs::path& base) {
  fs::path p(trim(raw));
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto path_setter = [](fs::path PipelineConfig::*member) {
      return [member](PipelineConfig& c, const std::string&, const std::string& v, const fs::path& base) {
        c.*member = resolve_path(v, base);
      };
    };
    t["paths.workdir"] = path_setter(&PipelineConfig::workdir);
    t["paths.lexicon"] = path_setter(&PipelineConfig::lexicon);
    t["paths.articles"] = path_setter(&PipelineConfig::articles);
    t["paths.companies"] = path_setter(&PipelineConfig::companies);
    t["paths.ratings"] = path_setter(&PipelineConfig::ratings);
    t["paths.investigations"] = path_setter(&PipelineConfig::investigations);

    t["lda.topics"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      const int previous = c.lda.num_topics;
      c.lda.num_topics = parse_integer<int>(k, v);
      if (c.lda.num_topics < 2) throw bad_value(k, v, "must be >= 2");
      // alpha follows 50 / topics unless it was set to something else
      if (c.lda.alpha == 50.0 / previous) c.lda.alpha = 50.0 / c.lda.num_topics;
      c.network.image_rows = c.lda.num_topics;
    };
    t["lda.alpha"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.lda.alpha = parse_real(k, v);
      if (!(c.lda.alpha > 0)) throw bad_value(k, v, "must be > 0");
    };
    t["lda.beta"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.lda.beta = parse_real(k, v);
      if (!(c.lda.beta > 0)) throw bad_value(k, v, "must be > 0");
    };
    t["lda.iterations"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.lda.iterations = parse_integer<int>(k, v);
      if (c.lda.iterations < 1) throw bad_value(k, v, "must be >= 1");
    };
    t["lda.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.lda.seed = parse_integer<std::uint64_t>(k, v);
    };
    t["features.scale"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.features.scale = parse_real(k, v);
      if (!(c.features.scale > 0)) throw bad_value(k, v, "must be > 0");
    };
    t["network.filters"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.network.conv_filters = parse_integer<int>(k, v);
      if (c.network.conv_filters < 1) throw bad_value(k, v, "must be >= 1");
    };
    t["network.widths"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      std::vector<int> widths;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) widths.push_back(parse_integer<int>(k, item));
      if (widths.size() != kHiddenLayers) throw bad_value(k, v, "expected 6 comma-separated widths");
      for (int i = 0; i < kHiddenLayers; ++i) {
        if (widths[i] < 1) throw bad_value(k, v, "widths must be >= 1");
        c.network.widths[i] = widths[i];
      }
    };
    t["network.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.network.seed = parse_integer<std::uint64_t>(k, v);
    };
    t["train.epochs"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.train.epochs = parse_integer<int>(k, v);
      if (c.train.epochs < 1) throw bad_value(k, v, "must be >= 1");
    };
    t["train.learning_rate"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.train.learning_rate = parse_real(k, v);
      if (c.train.learning_rate < 0) throw bad_value(k, v, "must be >= 0");
    };
    t["train.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.train.seed = parse_integer<std::uint64_t>(k, v);
    };
    t["train.shuffle"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.train.shuffle = parse_bool(k, v);
    };
    t["train.holdout_fraction"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.train.holdout_fraction = parse_real(k, v);
      if (!(c.train.holdout_fraction >= 0 && c.train.holdout_fraction < 1)) throw bad_value(k, v, "must be in [0, 1)");
    };
    t["verify.window"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.verify.window = parse_integer<int>(k, v);
      if (c.verify.window < 0) throw bad_value(k, v, "must be >= 0");
    };
    t["verify.folds"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.verify.folds = parse_integer<int>(k, v);
      if (c.verify.folds < 2) throw bad_value(k, v, "must be >= 2");
    };
    t["verify.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.verify.seed = parse_integer<std::uint64_t>(k, v);
    };
    auto synth_int = [](int synth::SynthConfig::*member) {
      return [member](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
        c.synth.*member = parse_integer<int>(k, v);
        if (c.synth.*member < 1) throw bad_value(k, v, "must be >= 1");
      };
    };
    t["synth.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.synth.seed = parse_integer<std::uint64_t>(k, v);
    };
    t["synth.topics"] = synth_int(&synth::SynthConfig::n_topics);
    t["synth.vocab_size"] = synth_int(&synth::SynthConfig::vocab_size);
    t["synth.docs"] = synth_int(&synth::SynthConfig::n_docs);
    t["synth.doc_length"] = synth_int(&synth::SynthConfig::doc_length);
    t["synth.companies"] = synth_int(&synth::SynthConfig::n_companies);
    t["synth.rated"] = synth_int(&synth::SynthConfig::n_rated);
    t["synth.evaluations"] = synth_int(&synth::SynthConfig::n_evaluations);
    t["synth.investigated"] = synth_int(&synth::SynthConfig::n_investigated);
    t["synth.signal"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.synth.signal_strength = parse_real(k, v);
      if (!(c.synth.signal_strength >= 0 && c.synth.signal_strength <= 1)) throw bad_value(k, v, "must be in [0, 1]");
    };
    return t;
  }();
  return table;
}

// ---- hashing -------------------------------------------------------------

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string read_file(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::io, std::string("cannot open ") + what + " file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string section_text(const PipelineConfig& cfg, std::string_view section) {
  std::istringstream all(describe(cfg));
  std::string line, out;
  while (std::getline(all, line)) {
    if (line.starts_with(std::string(section) + ".")) out += line + "\n";
  }
  return out;
}

// ---- artifact headers ----------------------------------------------------

std::string text_header(Stage s, std::uint64_t hash) {
  return std::string("# credscore ") + stage_name(s) + " v1 config_hash=" + hex_hash(hash) + "\n";
}

void require_artifact(const fs::path& p, Stage producer, const char* consumer) {
  if (!fs::exists(p)) {
    throw Error(Errc::missing_artifact, std::string(consumer) + ": missing " + p.filename().string() +
                                            " (run 'credscore " + stage_name(producer) + "' first)");
  }
}

void check_hash(std::uint64_t found, std::uint64_t expected, const fs::path& p, Stage producer,
                const char* consumer, bool force) {
  if (found == expected || force) return;
  throw Error(Errc::hash_mismatch,
              std::string(consumer) + ": " + p.filename().string() + " has config hash " + hex_hash(found) +
                  " but the current config expects " + hex_hash(expected) + " (rerun 'credscore " +
                  stage_name(producer) + "' or pass --force)");
}

// Reads a text artifact, checks its header, and returns the body.
std::string read_text_artifact(const fs::path& p, Stage producer, std::uint64_t expected,
                               const char* consumer, bool force) {
  require_artifact(p, producer, consumer);
  auto text = read_file(p, "artifact");
  const auto nl = text.find('\n');
  const std::string prefix = std::string("# credscore ") + stage_name(producer) + " v1 config_hash=";
  if (nl == std::string::npos || !text.starts_with(prefix)) {
    throw Error(Errc::format, std::string(consumer) + ": " + p.filename().string() + " has no artifact header");
  }
  const auto hex = text.substr(prefix.size(), nl - prefix.size());
  std::uint64_t found = 0;
  auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), found, 16);
  if (ec != std::errc{} || ptr != hex.data() + hex.size()) {
    throw Error(Errc::format, std::string(consumer) + ": " + p.filename().string() + " has a malformed hash");
  }
  check_hash(found, expected, p, producer, consumer, force);
  return text.substr(nl + 1);
}

void write_file_atomically(const fs::path& p, const std::string& bytes) {
  const auto tmp = fs::path(p.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error(Errc::io, "cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) throw Error(Errc::io, "failed writing " + tmp.string());
  }
  fs::rename(tmp, p);
}

// ---- ingest artifact -----------------------------------------------------

std::string serialize_ingest(const IngestResult& r, std::uint64_t hash) {
  nlohmann::json j;
  j["format"] = "credscore-ingest";
  j["version"] = 1;
  j["config_hash"] = hex_hash(hash);
  j["companies"] = r.company_ids;
  if (r.window) {
    j["date_window"] = {format_date(r.window->first), format_date(r.window->last)};
  } else {
    j["date_window"] = nullptr;
  }
  auto& arts = j["articles"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.article_ids.size(); ++i) {
    nlohmann::json bag = nlohmann::json::object();
    for (const auto& [term, count] : r.bags[i].counts) bag[term] = count;
    arts.push_back({{"id", r.article_ids[i]}, {"bag", std::move(bag)}});
  }
  j["mentions"] = r.mentions.by_company;
  return j.dump() + "\n";
}

IngestResult load_ingest(const fs::path& p, std::uint64_t expected, const char* consumer, bool force) {
  require_artifact(p, Stage::ingest, consumer);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(p, "artifact"));
    if (j.at("format") != "credscore-ingest" || j.at("version") != 1) {
      throw Error(Errc::format, std::string(consumer) + ": " + p.filename().string() + " is not an ingest artifact");
    }
    std::uint64_t found = 0;
    const auto hex = j.at("config_hash").get<std::string>();
    std::from_chars(hex.data(), hex.data() + hex.size(), found, 16);
    check_hash(found, expected, p, Stage::ingest, consumer, force);

    IngestResult r;
    r.company_ids = j.at("companies").get<std::vector<std::string>>();
    if (!j.at("date_window").is_null()) {
      r.window = DateWindow{parse_date(j["date_window"][0].get<std::string>()),
                            parse_date(j["date_window"][1].get<std::string>())};
    }
    for (const auto& a : j.at("articles")) {
      r.article_ids.push_back(a.at("id").get<std::string>());
      BagOfWords bag;
      for (const auto& [term, count] : a.at("bag").items()) bag.add(term, count.get<std::int64_t>());
      r.bags.push_back(std::move(bag));
    }
    r.mentions.by_company = j.at("mentions").get<std::map<std::string, std::vector<std::string>>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format, std::string(consumer) + ": corrupt " + p.filename().string() + " (" + e.what() + ")");
  }
}

std::vector<CompanyFeatures> load_features(const PipelineConfig& cfg, const Artifacts& art,
                                           const char* consumer, bool force) {
  const auto body = read_text_artifact(art.features, Stage::featurize, stage_hash(cfg, Stage::featurize),
                                       consumer, force);
  std::istringstream in(body);
  return read_features_csv(in, cfg.lda.num_topics);
}

std::set<std::string> known_companies(const IngestResult& r) {
  return {r.company_ids.begin(), r.company_ids.end()};
}

NetworkHyper network_for(const PipelineConfig& cfg) {
  NetworkHyper h = cfg.network;
  h.image_rows = cfg.lda.num_topics;
  return h;
}

}  // namespace

// ---- config --------------------------------------------------------------

PipelineConfig default_config() {
  PipelineConfig c;
  if (const char* env = std::getenv(kWorkdirEnv); env && *env) {
    c.workdir = env;
  } else {
    c.workdir = kDefaultWorkdir;
  }
  c.network.image_rows = c.lda.num_topics;
  return c;
}

void set_value(PipelineConfig& cfg, const std::string& key_path, const std::string& value,
               const fs::path& base_dir) {
  const auto& table = setters();
  auto it = table.find(key_path);
  if (it == table.end()) throw Error(Errc::config, key_path + ": unknown configuration key");
  it->second(cfg, key_path, value, base_dir);
}

void apply_config_text(PipelineConfig& cfg, std::istream& in, const fs::path& base_dir) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::config, "config line " + std::to_string(e.line()) + ": " + e.message(), e.line());
  }
  // explicit alpha is applied after lda.topics
  std::vector<std::pair<std::string, std::string>> deferred;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw Error(Errc::config, section + ": key outside of a [section]");
    }
    for (const auto& [key, node] : keys) {
      const auto path = section + "." + key;
      if (path == "lda.alpha") {
        deferred.emplace_back(path, node.data());
      } else {
        set_value(cfg, path, node.data(), base_dir);
      }
    }
  }
  for (const auto& [k, v] : deferred) set_value(cfg, k, v, base_dir);
}

void apply_config_file(PipelineConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot open config file " + path.string());
  apply_config_text(cfg, in, path.parent_path());
}

void override_seed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.lda.seed = seed;
  cfg.network.seed = seed;
  cfg.train.seed = seed;
  cfg.verify.seed = seed;
  cfg.synth.seed = seed;
}

std::string describe(const PipelineConfig& c) {
  std::ostringstream os;
  os << "lda.topics=" << c.lda.num_topics << '\n'
     << "lda.alpha=" << real_text(c.lda.alpha) << '\n'
     << "lda.beta=" << real_text(c.lda.beta) << '\n'
     << "lda.iterations=" << c.lda.iterations << '\n'
     << "lda.seed=" << c.lda.seed << '\n'
     << "features.scale=" << real_text(c.features.scale) << '\n'
     << "network.filters=" << c.network.conv_filters << '\n'
     << "network.widths=";
  for (int i = 0; i < kHiddenLayers; ++i) os << (i ? "," : "") << c.network.widths[i];
  os << '\n'
     << "network.seed=" << c.network.seed << '\n'
     << "train.epochs=" << c.train.epochs << '\n'
     << "train.learning_rate=" << real_text(c.train.learning_rate) << '\n'
     << "train.seed=" << c.train.seed << '\n'
     << "train.shuffle=" << (c.train.shuffle ? "true" : "false") << '\n'
     << "train.holdout_fraction=" << real_text(c.train.holdout_fraction) << '\n'
     << "verify.window=" << c.verify.window << '\n'
     << "verify.folds=" << c.verify.folds << '\n'
     << "verify.seed=" << c.verify.seed << '\n'
     << "synth.seed=" << c.synth.seed << '\n'
     << "synth.topics=" << c.synth.n_topics << '\n'
     << "synth.vocab_size=" << c.synth.vocab_size << '\n'
     << "synth.docs=" << c.synth.n_docs << '\n'
     << "synth.doc_length=" << c.synth.doc_length << '\n'
     << "synth.companies=" << c.synth.n_companies << '\n'
     << "synth.rated=" << c.synth.n_rated << '\n'
     << "synth.evaluations=" << c.synth.n_evaluations << '\n'
     << "synth.investigated=" << c.synth.n_investigated << '\n'
     << "synth.signal=" << real_text(c.synth.signal_strength) << '\n';
  return os.str();
}

InputPaths resolve_inputs(const PipelineConfig& cfg) {
  const auto defaults = synth::world_files(cfg.workdir / "synth");
  auto pick = [](const fs::path& set, const fs::path& fallback) { return set.empty() ? fallback : set; };
  return {pick(cfg.lexicon, defaults.lexicon), pick(cfg.articles, defaults.articles),
          pick(cfg.companies, defaults.companies), pick(cfg.ratings, defaults.ratings),
          pick(cfg.investigations, defaults.investigations)};
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::lda: return "lda";
    case Stage::featurize: return "featurize";
    case Stage::train: return "train";
    case Stage::rank: return "rank";
    case Stage::verify: return "verify";
  }
  return "?";
}

std::string hex_hash(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t stage_hash(const PipelineConfig& cfg, Stage s) {
  const auto in = resolve_inputs(cfg);
  auto content = [](const fs::path& p, const char* what) { return hex_hash(fnv1a(read_file(p, what))); };
  switch (s) {
    case Stage::ingest:
      return fnv1a("ingest|" + content(in.lexicon, "lexicon") + "|" + content(in.articles, "articles") + "|" +
                   content(in.companies, "companies"));
    case Stage::lda:
      return fnv1a(hex_hash(stage_hash(cfg, Stage::ingest)) + "|lda|" + section_text(cfg, "lda"));
    case Stage::featurize:
      return fnv1a(hex_hash(stage_hash(cfg, Stage::lda)) + "|featurize|" + section_text(cfg, "features"));
    case Stage::train:
      return fnv1a(hex_hash(stage_hash(cfg, Stage::featurize)) + "|train|" + section_text(cfg, "network") +
                   section_text(cfg, "train") + content(in.ratings, "ratings"));
    case Stage::rank:
      return fnv1a(hex_hash(stage_hash(cfg, Stage::train)) + "|rank|");
    case Stage::verify:
      return fnv1a(hex_hash(stage_hash(cfg, Stage::featurize)) + "|verify|" + section_text(cfg, "network") +
                   section_text(cfg, "train") + section_text(cfg, "verify") + content(in.ratings, "ratings") +
                   content(in.investigations, "investigations"));
  }
  return 0;
}

Artifacts artifacts(const fs::path& w) {
  return {w / "ingest.v1.json",   w / "lda.v1.bin",         w / "lda.keywords.v1.txt",
          w / "features.v1.csv",  w / "features.v1.pgm",    w / "train.v1.ckpt",
          w / "train.loss.v1.txt", w / "train.weights.v1.pgm", w / "rank.v1.csv",
          w / "verify.v1.txt"};
}

// ---- in-memory stages ----------------------------------------------------

IngestResult ingest(const Lexicon& lex, std::span<const Article> articles,
                    std::span<const Company> companies) {
  IngestResult r;
  r.article_ids.reserve(articles.size());
  r.bags.reserve(articles.size());
  for (const auto& a : articles) {
    r.article_ids.push_back(a.id);
    r.bags.push_back(extract_bag(a.body, lex));
  }
  for (const auto& c : companies) r.company_ids.push_back(c.id);
  r.mentions = build_mention_index(articles, companies);
  if (!articles.empty()) {
    const auto [lo, hi] = std::minmax_element(articles.begin(), articles.end(),
                                              [](const Article& a, const Article& b) { return a.date < b.date; });
    r.window = DateWindow{lo->date, hi->date};
  }
  return r;
}

std::vector<CompanyFeatures> featurize(const IngestResult& in, const TopicModel& model) {
  if (in.bags.size() != model.num_docs()) {
    throw Error(Errc::shape_mismatch, "featurize: topic model was fitted on a different corpus");
  }
  std::unordered_map<std::string, std::size_t> doc_of;
  for (std::size_t i = 0; i < in.article_ids.size(); ++i) doc_of.emplace(in.article_ids[i], i);
  const auto keywords = keyword_grid(model);
  std::vector<CompanyFeatures> out;
  for (const auto& [company, article_ids] : in.mentions.by_company) {
    if (article_ids.empty()) continue;
    std::vector<std::size_t> docs;
    docs.reserve(article_ids.size());
    for (const auto& a : article_ids) {
      auto it = doc_of.find(a);
      if (it == doc_of.end()) throw Error(Errc::unknown_id, "featurize: unknown article '" + a + "'");
      docs.push_back(it->second);
    }
    out.push_back(aggregate_company(company, docs, model, keywords, in.bags));
  }
  return out;
}

TargetMap restrict_targets(const TargetMap& targets, std::span<const Example> examples) {
  std::set<std::string> have;
  for (const auto& e : examples) have.insert(e.company_id);
  TargetMap out;
  for (const auto& [id, t] : targets) {
    if (have.contains(id)) out.emplace(id, t);
  }
  return out;
}

WorldRun prepare_world(const synth::SynthWorld& world, const PipelineConfig& cfg) {
  WorldRun run;
  const auto lex = Lexicon::from_terms(world.lexicon);
  run.ingest = ingest(lex, world.articles, world.companies);
  run.model = fit_lda(run.ingest.bags, cfg.lda);
  const auto features = featurize(run.ingest, run.model);
  run.examples = make_examples(features, cfg.features);

  const auto known = known_companies(run.ingest);
  std::istringstream ratings(world.ratings_csv);
  run.ratings = restrict_targets(load_ratings(ratings, known).ratings, run.examples);
  std::istringstream inv(world.investigations_csv);
  const auto records = load_investigations(inv, known);
  run.negative = restrict_targets(build_negative_targets(records, world.companies, run.ingest.window),
                                  run.examples);
  return run;
}

GradCheckSummary random_gradient_check(const NetworkHyper& hyper, int triples, std::uint64_t seed) {
  GradCheckSummary s;
  for (int t = 0; t < triples; ++t) {
    Rng rng(seed + static_cast<std::uint64_t>(t));
    NetworkHyper h = hyper;
    h.seed = rng();
    auto params = init_params(h);
    auto tensors = params.tensors();
    // odd-indexed tensors are biases
    for (std::size_t i = 1; i < tensors.size(); i += 2) {
      for (auto& b : tensors[i]) b = uniform01(rng) - 0.5;
    }
    FeatureImage image(h.image_rows, kImageCols);
    for (auto& px : image.pixels()) px = uniform01(rng);
    const double data1 = uniform01(rng);
    const double target = uniform01(rng);
    const auto r = gradient_check(params, image, data1, target);
    if (t == 0 || r.max_relative_error > s.max_relative_error) {
      s.max_relative_error = r.max_relative_error;
      s.worst_tensor = r.worst_tensor;
    }
    ++s.triples;
  }
  return s;
}

// ---- commands ------------------------------------------------------------

int cmd_synth(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const auto dir = opt.synth_out.value_or(cfg.workdir / "synth");
  const auto world = synth::generate(cfg.synth);
  write_world(world, dir);
  out << "synth: " << world.companies.size() << " companies, " << world.articles.size() << " articles, "
      << world.lexicon.size() << " lexicon terms, signal " << cfg.synth.signal_strength << " -> "
      << dir.string() << '\n';
  return 0;
}

int cmd_ingest(const PipelineConfig& cfg, const CommandOptions&, std::ostream& out) {
  const auto in = resolve_inputs(cfg);
  const auto lex = load_lexicon_file(in.lexicon);
  const auto articles = load_articles_file(in.articles);
  const auto companies = load_companies_file(in.companies);
  const auto result = ingest(lex, articles, companies);
  const auto art = artifacts(cfg.workdir);
  write_file_atomically(art.ingest, serialize_ingest(result, stage_hash(cfg, Stage::ingest)));

  std::size_t mentioned = 0;
  std::int64_t tokens = 0;
  for (const auto& [id, list] : result.mentions.by_company) mentioned += list.empty() ? 0 : 1;
  for (const auto& b : result.bags) tokens += b.total;
  out << "ingest: " << articles.size() << " articles, " << tokens << " lexicon tokens, " << mentioned << "/"
      << companies.size() << " companies mentioned -> " << art.ingest.filename().string() << '\n';
  return 0;
}

int cmd_lda(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const auto art = artifacts(cfg.workdir);
  const auto in = load_ingest(art.ingest, stage_hash(cfg, Stage::ingest), "lda", opt.force);
  const auto model = fit_lda(in.bags, cfg.lda);
  const auto hash = stage_hash(cfg, Stage::lda);
  {
    std::ostringstream os;
    save_topic_model(os, model, hash);
    write_file_atomically(art.lda, os.str());
  }
  {
    std::ostringstream os;
    os << text_header(Stage::lda, hash);
    const auto grid = keyword_grid(model);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      os << "topic " << k << ':';
      for (const auto& t : grid[k]) os << ' ' << t;
      os << '\n';
    }
    write_file_atomically(art.keywords, os.str());
  }
  char ll[40];
  std::snprintf(ll, sizeof ll, "%.4f", log_likelihood(model));
  out << "lda: K=" << model.num_topics() << " docs=" << model.num_docs() << " tokens=" << model.num_tokens()
      << " vocab=" << model.vocab_size() << " sweeps=" << cfg.lda.iterations << " log_likelihood=" << ll
      << " -> " << art.lda.filename().string() << '\n';
  return 0;
}

int cmd_featurize(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const auto art = artifacts(cfg.workdir);
  const auto in = load_ingest(art.ingest, stage_hash(cfg, Stage::ingest), "featurize", opt.force);
  require_artifact(art.lda, Stage::lda, "featurize");
  std::ifstream model_in(art.lda, std::ios::binary);
  std::uint64_t tag = 0;
  const auto model = load_topic_model(model_in, &tag);
  check_hash(tag, stage_hash(cfg, Stage::lda), art.lda, Stage::lda, "featurize", opt.force);
  if (model.num_topics() != cfg.lda.num_topics) {
    throw Error(Errc::shape_mismatch, "featurize: topic model has " + std::to_string(model.num_topics()) +
                                          " topics, config says " + std::to_string(cfg.lda.num_topics));
  }

  const auto features = featurize(in, model);
  std::ostringstream os;
  os << text_header(Stage::featurize, stage_hash(cfg, Stage::featurize));
  write_features_csv(os, features);
  write_file_atomically(art.features, os.str());

  if (opt.export_images) {
    fs::create_directories(art.images);
    for (const auto& f : features) export_pgm(construct_image(f, cfg.features), art.images / (f.company_id + ".pgm"));
  }
  out << "featurize: " << features.size() << " companies with mentions ("
      << in.company_ids.size() - features.size() << " excluded) -> " << art.features.filename().string() << '\n';
  return 0;
}

int cmd_train(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const auto art = artifacts(cfg.workdir);
  const auto features = load_features(cfg, art, "train", opt.force);
  const auto in = load_ingest(art.ingest, stage_hash(cfg, Stage::ingest), "train", opt.force);
  const auto examples = make_examples(features, cfg.features);

  std::ifstream ratings_in(resolve_inputs(cfg).ratings);
  if (!ratings_in) throw Error(Errc::io, "train: cannot open ratings file " + resolve_inputs(cfg).ratings.string());
  const auto ratings = load_ratings(ratings_in, known_companies(in));
  const auto targets = restrict_targets(ratings.ratings, examples);

  const auto result = train(examples, targets, network_for(cfg), cfg.train);
  const auto hash = stage_hash(cfg, Stage::train);
  {
    std::ostringstream os;
    save_checkpoint(os, result.model, hash);
    write_file_atomically(art.checkpoint, os.str());
  }
  {
    std::ostringstream os;
    os << text_header(Stage::train, hash);
    write_loss_history(os, result.loss_history);
    write_file_atomically(art.loss, os.str());
  }
  {
    std::ostringstream os;
    write_pgm(os, rescale_to_unit(sum_first_layer_weights(result.model.params)));
    write_file_atomically(art.weights, os.str());
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "loss %.6f -> %.6f", result.loss_history.front(), result.loss_history.back());
  out << "train: " << result.train_ids.size() << " rated companies (" << result.holdout_ids.size()
      << " held out, " << ratings.ratings.size() - targets.size() << " without features), "
      << cfg.train.epochs << " epochs, " << buf << " -> " << art.checkpoint.filename().string() << '\n';
  return 0;
}

int cmd_rank(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const auto art = artifacts(cfg.workdir);
  require_artifact(art.checkpoint, Stage::train, "rank");
  const auto features = load_features(cfg, art, "rank", opt.force);
  std::ifstream ckpt(art.checkpoint, std::ios::binary);
  std::uint64_t tag = 0;
  const auto model = load_checkpoint(ckpt, &tag);
  check_hash(tag, stage_hash(cfg, Stage::train), art.checkpoint, Stage::train, "rank", opt.force);

  const auto examples = make_examples(features, cfg.features);
  const auto ranking = predict_all(model, examples);
  std::ostringstream os;
  os << text_header(Stage::rank, stage_hash(cfg, Stage::rank));
  write_ranking_csv(os, ranking);
  write_file_atomically(art.ranking, os.str());
  out << "rank: " << ranking.size() << " companies ranked -> " << art.ranking.filename().string() << '\n';
  return 0;
}

int cmd_verify(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const auto art = artifacts(cfg.workdir);
  const auto features = load_features(cfg, art, "verify", opt.force);
  const auto in = load_ingest(art.ingest, stage_hash(cfg, Stage::ingest), "verify", opt.force);
  const auto examples = make_examples(features, cfg.features);
  const auto inputs = resolve_inputs(cfg);
  const auto known = known_companies(in);

  std::ifstream ratings_in(inputs.ratings);
  if (!ratings_in) throw Error(Errc::io, "verify: cannot open ratings file " + inputs.ratings.string());
  const auto ratings = restrict_targets(load_ratings(ratings_in, known).ratings, examples);

  std::ifstream inv_in(inputs.investigations);
  if (!inv_in) throw Error(Errc::io, "verify: cannot open investigations file " + inputs.investigations.string());
  const auto records = load_investigations(inv_in, known);
  std::vector<Company> companies;
  for (const auto& id : in.company_ids) companies.push_back({id, id, {}});
  const auto negative = restrict_targets(build_negative_targets(records, companies, in.window), examples);

  const auto report = cross_validate(examples, ratings, negative, cfg.verify, network_for(cfg), cfg.train);
  std::ostringstream os;
  os << text_header(Stage::verify, stage_hash(cfg, Stage::verify));
  write_report(os, report);
  write_file_atomically(art.report, os.str());

  char buf[128];
  std::snprintf(buf, sizeof buf, "mean agreement %.4f (window %d, %d folds), mean spearman %.4f",
                report.mean_agreement, report.window, report.folds, report.mean_spearman);
  out << "verify: " << buf << " -> " << art.report.filename().string() << '\n';
  return 0;
}

int cmd_gradcheck(const PipelineConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const auto hyper = network_for(cfg);
  const auto s = random_gradient_check(hyper, opt.gradcheck_triples, cfg.network.seed);
  const bool ok = s.max_relative_error <= opt.gradcheck_tolerance;
  char buf[160];
  std::snprintf(buf, sizeof buf, "gradcheck: %d triples, %zu parameters, max relative error %.3e (%s) vs tolerance %.1e: %s",
                s.triples, NetworkParams::zeros(hyper).parameter_count(), s.max_relative_error,
                s.worst_tensor.c_str(), opt.gradcheck_tolerance, ok ? "ok" : "FAILED");
  out << buf << '\n';
  return ok ? 0 : 1;
}

// ---- lock ----------------------------------------------------------------

WorkdirLock::WorkdirLock(const fs::path& workdir) : path_(workdir / ".credscore.lock") {
  fs::create_directories(workdir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    throw Error(Errc::locked, "workdir " + workdir.string() + " is locked by another command (" +
                                  path_.string() + "); remove it if no command is running");
  }
  std::fclose(f);
}

WorkdirLock::~WorkdirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace credscore::pipeline
