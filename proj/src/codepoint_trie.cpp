#include "credscore/codepoint_trie.hpp"

#include <algorithm>

namespace credscore {

CodepointTrie::CodepointTrie() : nodes_(1) {}

std::uint32_t CodepointTrie::insert(std::u32string_view key) {
  std::uint32_t node = 0;
  for (char32_t cp : key) {
    auto it = nodes_[node].next.find(cp);
    if (it == nodes_[node].next.end()) {
      const auto child = static_cast<std::uint32_t>(nodes_.size());
      nodes_[node].next.emplace(cp, child);
      nodes_.emplace_back();
      node = child;
    } else {
      node = it->second;
    }
  }
  if (nodes_[node].key < 0) {
    nodes_[node].key = static_cast<std::int64_t>(key_count_++);
    max_key_length_ = std::max(max_key_length_, key.size());
  }
  return static_cast<std::uint32_t>(nodes_[node].key);
}

std::optional<std::uint32_t> CodepointTrie::find(std::u32string_view key) const {
  std::uint32_t node = 0;
  for (char32_t cp : key) {
    auto it = nodes_[node].next.find(cp);
    if (it == nodes_[node].next.end()) return std::nullopt;
    node = it->second;
  }
  if (nodes_[node].key < 0) return std::nullopt;
  return static_cast<std::uint32_t>(nodes_[node].key);
}

std::optional<CodepointTrie::Match> CodepointTrie::longest_prefix(std::u32string_view text) const {
  std::optional<Match> best;
  for_each_prefix(text, [&](Match m) { best = m; });
  return best;
}

}  // namespace credscore
