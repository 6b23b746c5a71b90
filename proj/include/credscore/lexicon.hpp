#ifndef CREDSCORE_LEXICON_HPP
#define CREDSCORE_LEXICON_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "credscore/codepoint_trie.hpp"

namespace credscore {

// Immutable set of recognized terms. Terms are kept sorted by UTF-8 byte
// order; term(i) and the index reported by longest_match agree.
class Lexicon {
 public:
  // Throws Error(Errc::empty_lexicon) if no non-empty term remains,
  // Error(Errc::decode) for invalid UTF-8. Duplicates collapse.
  static Lexicon from_terms(std::vector<std::string> terms);

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& term(std::size_t i) const { return terms_.at(i); }
  // Length of the longest term, in codepoints.
  std::size_t max_term_len() const { return trie_.max_key_length(); }
  bool contains(std::string_view term) const;

  // Longest term that is a prefix of text.
  std::optional<CodepointTrie::Match> longest_match(std::u32string_view text) const {
    return trie_.longest_prefix(text.substr(0, std::min(text.size(), max_term_len())));
  }

 private:
  Lexicon() = default;
  std::vector<std::string> terms_;
  CodepointTrie trie_;
};

// One term per line, UTF-8, LF or CRLF. Surrounding ASCII whitespace is
// trimmed and blank lines are skipped.
Lexicon load_lexicon(std::istream& in);
Lexicon load_lexicon_file(const std::filesystem::path& path);

struct BagOfWords {
  std::map<std::string, std::int64_t> counts;
  std::int64_t total = 0;

  void add(const std::string& term, std::int64_t n = 1) {
    counts[term] += n;
    total += n;
  }
  std::int64_t count(const std::string& term) const {
    auto it = counts.find(term);
    return it == counts.end() ? 0 : it->second;
  }
  bool operator==(const BagOfWords&) const = default;
};

// Greedy forward maximum matching: at each codepoint take the longest
// lexicon term starting there and jump past it, otherwise advance by one.
// Invalid UTF-8 in text throws Error(Errc::decode).
BagOfWords extract_bag(std::string_view text, const Lexicon& lex);
BagOfWords extract_bag(std::u32string_view text, const Lexicon& lex);

}  // namespace credscore

#endif
