#include "credscore/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "credscore/error.hpp"
#include "credscore/utf8.hpp"

namespace credscore {

namespace {

int parse_fixed_digits(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return -1;
  return v;
}

std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                        : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

Date parse_date(std::string_view s) {
  const bool shape = s.size() == 10 && s[4] == '-' && s[7] == '-';
  const int y = shape ? parse_fixed_digits(s.substr(0, 4)) : -1;
  const int m = shape ? parse_fixed_digits(s.substr(5, 2)) : -1;
  const int d = shape ? parse_fixed_digits(s.substr(8, 2)) : -1;
  const Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                  std::chrono::day{static_cast<unsigned>(d)}};
  if (y < 0 || m < 0 || d < 0 || !date.ok()) {
    throw Error(Errc::parse, "invalid date '" + std::string(s) + "' (expected YYYY-MM-DD)");
  }
  return date;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::vector<Article> load_articles(std::istream& in) {
  std::vector<Article> out;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = strip_cr(line);
    if (text.find_first_not_of(" \t") == std::string_view::npos) continue;
    auto where = [&] { return "articles line " + std::to_string(lineno) + ": "; };

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::parse, where() + "malformed record (" + e.what() + ")", lineno);
    }
    if (!rec.is_object()) throw Error(Errc::parse, where() + "record is not an object", lineno);

    auto field = [&](const char* name) -> std::string {
      auto it = rec.find(name);
      if (it == rec.end()) {
        throw Error(Errc::parse, where() + "missing field '" + name + "'", lineno);
      }
      if (!it->is_string()) {
        throw Error(Errc::parse, where() + "field '" + name + "' must be a string", lineno);
      }
      return it->get<std::string>();
    };

    Article a;
    a.id = field("id");
    try {
      a.date = parse_date(field("date"));
    } catch (const Error& e) {
      throw Error(Errc::parse, where() + "field 'date': " + e.what(), lineno);
    }
    a.title = field("title");
    a.body = field("body");
    if (a.id.empty()) throw Error(Errc::parse, where() + "field 'id' is empty", lineno);

    auto [it, fresh] = first_line.emplace(a.id, lineno);
    if (!fresh) {
      throw Error(Errc::duplicate_key,
                  "duplicate article id '" + a.id + "' on lines " + std::to_string(it->second) +
                      " and " + std::to_string(lineno),
                  lineno);
    }
    out.push_back(std::move(a));
  }
  if (in.bad()) throw Error(Errc::io, "failed reading articles stream");
  return out;
}

std::vector<Article> load_articles_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open articles file " + path.string());
  return load_articles(in);
}

void write_articles(std::ostream& out, std::span<const Article> articles) {
  for (const auto& a : articles) {
    nlohmann::ordered_json rec;
    rec["id"] = a.id;
    rec["date"] = format_date(a.date);
    rec["title"] = a.title;
    rec["body"] = a.body;
    out << rec.dump() << '\n';
  }
}

std::vector<Company> load_companies(std::istream& in) {
  std::vector<Company> out;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = strip_cr(line);
    if (text.empty() || text.front() == '#') continue;
    auto where = [&] { return "companies line " + std::to_string(lineno) + ": "; };
    if (!utf8::try_decode(text)) throw Error(Errc::decode, where() + "invalid UTF-8", lineno);

    auto fields = split_commas(text);
    if (fields.size() < 2) {
      throw Error(Errc::parse, where() + "expected id,canonical_name[,alias...]", lineno);
    }
    Company c;
    c.id = std::move(fields[0]);
    c.canonical_name = std::move(fields[1]);
    if (c.id.empty()) throw Error(Errc::parse, where() + "empty company id", lineno);
    if (c.canonical_name.empty()) throw Error(Errc::parse, where() + "empty canonical_name", lineno);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      if (!fields[i].empty()) c.aliases.push_back(std::move(fields[i]));
    }
    auto [it, fresh] = first_line.emplace(c.id, lineno);
    if (!fresh) {
      throw Error(Errc::duplicate_key,
                  "duplicate company id '" + c.id + "' on lines " + std::to_string(it->second) +
                      " and " + std::to_string(lineno),
                  lineno);
    }
    out.push_back(std::move(c));
  }
  if (in.bad()) throw Error(Errc::io, "failed reading companies stream");
  return out;
}

std::vector<Company> load_companies_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open companies file " + path.string());
  return load_companies(in);
}

void write_companies(std::ostream& out, std::span<const Company> companies) {
  out << "# id,canonical_name,aliases...\n";
  for (const auto& c : companies) {
    out << c.id << ',' << c.canonical_name;
    for (const auto& a : c.aliases) out << ',' << a;
    out << '\n';
  }
}

MentionDetector::MentionDetector(std::span<const Company> companies) {
  ids_.reserve(companies.size());
  for (std::size_t i = 0; i < companies.size(); ++i) {
    ids_.push_back(companies[i].id);
    auto add = [&](const std::string& name) {
      if (name.empty()) return;
      const auto key = names_.insert(utf8::decode(name));
      if (key >= owners_.size()) owners_.resize(key + 1);
      auto& o = owners_[key];
      if (o.empty() || o.back() != i) o.push_back(i);
    };
    add(companies[i].canonical_name);
    for (const auto& a : companies[i].aliases) add(a);
  }
}

void MentionDetector::scan(std::string_view text, std::vector<char>& hit) const {
  const auto cps = utf8::decode(text);
  const std::u32string_view view(cps);
  for (std::size_t pos = 0; pos < view.size(); ++pos) {
    names_.for_each_prefix(view.substr(pos), [&](CodepointTrie::Match m) {
      for (auto c : owners_[m.key]) hit[c] = 1;
    });
  }
}

std::vector<std::size_t> MentionDetector::detect_indices(const Article& a) const {
  std::vector<char> hit(ids_.size(), 0);
  scan(a.title, hit);
  scan(a.body, hit);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hit.size(); ++i) {
    if (hit[i]) out.push_back(i);
  }
  return out;
}

std::set<std::string> MentionDetector::detect(const Article& a) const {
  std::set<std::string> out;
  for (auto i : detect_indices(a)) out.insert(ids_[i]);
  return out;
}

std::set<std::string> detect_mentions(const Article& a, std::span<const Company> companies) {
  return MentionDetector(companies).detect(a);
}

MentionIndex build_mention_index(std::span<const Article> articles,
                                 std::span<const Company> companies) {
  MentionIndex index;
  for (const auto& c : companies) index.by_company[c.id];
  const MentionDetector detector(companies);
  for (const auto& a : articles) {
    for (auto i : detector.detect_indices(a)) {
      index.by_company[companies[i].id].push_back(a.id);
    }
  }
  for (auto& [id, list] : index.by_company) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return index;
}

}  // namespace credscore
