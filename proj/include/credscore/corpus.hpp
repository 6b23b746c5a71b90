#ifndef CREDSCORE_CORPUS_HPP
#define CREDSCORE_CORPUS_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "credscore/codepoint_trie.hpp"

namespace credscore {

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD. Throws Error(Errc::parse).
Date parse_date(std::string_view s);
std::string format_date(Date d);

struct Article {
  std::string id;
  Date date;
  std::string title;
  std::string body;

  bool operator==(const Article&) const = default;
};

struct Company {
  std::string id;
  std::string canonical_name;
  std::vector<std::string> aliases;

  bool operator==(const Company&) const = default;
};

// Articles: one JSON object per line with string fields id, date, title, body.
// Blank lines are skipped. Order is preserved.
std::vector<Article> load_articles(std::istream& in);
std::vector<Article> load_articles_file(const std::filesystem::path& path);
void write_articles(std::ostream& out, std::span<const Article> articles);

// Companies: comma-separated id,canonical_name[,alias...]. Lines starting
// with '#' are comments. Fields cannot contain commas.
std::vector<Company> load_companies(std::istream& in);
std::vector<Company> load_companies_file(const std::filesystem::path& path);
void write_companies(std::ostream& out, std::span<const Company> companies);

// Substring matcher over every canonical name and alias. Built once and
// shared read-only across articles.
class MentionDetector {
 public:
  explicit MentionDetector(std::span<const Company> companies);

  // Indices into the company list, ascending.
  std::vector<std::size_t> detect_indices(const Article& a) const;
  std::set<std::string> detect(const Article& a) const;

 private:
  void scan(std::string_view text, std::vector<char>& hit) const;

  std::vector<std::string> ids_;
  CodepointTrie names_;
  std::vector<std::vector<std::size_t>> owners_;  // trie key -> company indices
};

// A company is mentioned when its canonical name or any alias occurs as a
// contiguous substring of the title or the body.
std::set<std::string> detect_mentions(const Article& a, std::span<const Company> companies);

struct MentionIndex {
  // company id -> sorted, deduplicated article ids
  std::map<std::string, std::vector<std::string>> by_company;

  bool operator==(const MentionIndex&) const = default;
};

MentionIndex build_mention_index(std::span<const Article> articles,
                                 std::span<const Company> companies);

}  // namespace credscore

#endif
