#ifndef CREDSCORE_CODEPOINT_TRIE_HPP
#define CREDSCORE_CODEPOINT_TRIE_HPP

#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace credscore {

// Prefix tree keyed by codepoints. Each distinct key receives a dense id in
// insertion order; reinserting a key returns its existing id.
class CodepointTrie {
 public:
  struct Match {
    std::uint32_t key;
    std::size_t length;  // in codepoints
  };

  CodepointTrie();

  std::uint32_t insert(std::u32string_view key);
  std::optional<std::uint32_t> find(std::u32string_view key) const;

  // Longest key that is a prefix of text.
  std::optional<Match> longest_prefix(std::u32string_view text) const;

  // Invokes f(Match) for every key that is a prefix of text, shortest first.
  template <class F>
  void for_each_prefix(std::u32string_view text, F&& f) const {
    std::uint32_t node = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      auto it = nodes_[node].next.find(text[i]);
      if (it == nodes_[node].next.end()) return;
      node = it->second;
      if (nodes_[node].key >= 0) {
        f(Match{static_cast<std::uint32_t>(nodes_[node].key), i + 1});
      }
    }
  }

  std::size_t key_count() const { return key_count_; }
  std::size_t max_key_length() const { return max_key_length_; }

 private:
  struct Node {
    std::unordered_map<char32_t, std::uint32_t> next;
    std::int64_t key = -1;
  };
  std::vector<Node> nodes_;
  std::size_t key_count_ = 0;
  std::size_t max_key_length_ = 0;
};

}  // namespace credscore

#endif
