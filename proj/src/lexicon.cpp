#include "credscore/lexicon.hpp"

#include <algorithm>
#include <fstream>

#include "credscore/error.hpp"
#include "credscore/utf8.hpp"

namespace credscore {

namespace {

std::string_view trim_ascii(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

Lexicon Lexicon::from_terms(std::vector<std::string> terms) {
  std::erase_if(terms, [](const std::string& t) { return t.empty(); });
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  if (terms.empty()) throw Error(Errc::empty_lexicon, "lexicon has no terms");

  Lexicon lex;
  for (const auto& t : terms) {
    const auto id = lex.trie_.insert(utf8::decode(t));
    if (id != lex.terms_.size()) {
      throw Error(Errc::invalid_argument, "inconsistent term index for '" + t + "'");
    }
    lex.terms_.push_back(t);
  }
  return lex;
}

bool Lexicon::contains(std::string_view term) const {
  auto cps = utf8::try_decode(term);
  return cps && trie_.find(*cps).has_value();
}

Lexicon load_lexicon(std::istream& in) {
  std::vector<std::string> terms;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto term = trim_ascii(line);
    if (term.empty()) continue;
    if (!utf8::try_decode(term)) {
      throw Error(Errc::decode, "lexicon line " + std::to_string(lineno) + ": invalid UTF-8",
                  lineno);
    }
    terms.emplace_back(term);
  }
  if (in.bad()) throw Error(Errc::io, "failed reading lexicon stream");
  return Lexicon::from_terms(std::move(terms));
}

Lexicon load_lexicon_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open lexicon file " + path.string());
  return load_lexicon(in);
}

BagOfWords extract_bag(std::u32string_view text, const Lexicon& lex) {
  BagOfWords bag;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (auto m = lex.longest_match(text.substr(pos))) {
      bag.add(lex.term(m->key));
      pos += m->length;
    } else {
      ++pos;
    }
  }
  return bag;
}

BagOfWords extract_bag(std::string_view text, const Lexicon& lex) {
  return extract_bag(utf8::decode(text), lex);
}

}  // namespace credscore
