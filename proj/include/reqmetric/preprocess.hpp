#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace reqmetric {

using TokenList = std::vector<std::string>;

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::set<std::string, std::less<>> words) : words_(std::move(words)) {}

  bool contains(std::string_view token) const { return words_.contains(token); }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::set<std::string, std::less<>>& words() const noexcept { return words_; }

 private:
  std::set<std::string, std::less<>> words_;
};

// One token per line, '#' starts a comment, blank lines ignored. Entries are
// normalized the same way tokens are (NFC, lowercase).
StopwordSet parse_stopwords(std::string_view text);
StopwordSet load_stopwords(const std::filesystem::path& path);

// NFC normalization followed by full Unicode lowercasing. Invalid UTF-8
// sequences are replaced with U+FFFD.
std::string normalize_lower(std::string_view text);

// Splits UTF-8 text on Unicode White_Space code points. Empty pieces are
// never returned.
std::vector<std::string_view> split_whitespace(std::string_view text);

// Lowercase, split on whitespace, strip leading/trailing punctuation and
// symbols from each piece, drop pieces left empty. Interior punctuation
// ("anti-malware", "v1.2") is kept.
TokenList tokenize(std::string_view text);

TokenList remove_stopwords(const TokenList& tokens, const StopwordSet& stopwords);

// tokenize + remove_stopwords.
TokenList clean(std::string_view text, const StopwordSet& stopwords);

}  // namespace reqmetric
