#include "reqmetric/preprocess.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "io.hpp"
#include "reqmetric/error.hpp"

namespace reqmetric {

namespace {

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw std::runtime_error("ICU NFC normalizer unavailable");
  return *n;
}

icu::UnicodeString to_nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
  return out;
}

// Punctuation (P*) or symbol (S*) general category.
bool is_strippable(UChar32 c) {
  return (U_GET_GC_MASK(c) & (U_GC_P_MASK | U_GC_S_MASK)) != 0;
}

// Trims leading and trailing strippable code points from a UTF-8 piece.
std::string_view strip_punct(std::string_view piece) {
  const auto* s = reinterpret_cast<const uint8_t*>(piece.data());
  const auto len = static_cast<int32_t>(piece.size());

  int32_t begin = 0;
  while (begin < len) {
    int32_t next = begin;
    UChar32 c;
    U8_NEXT(s, next, len, c);
    if (c < 0 || !is_strippable(c)) break;
    begin = next;
  }
  int32_t end = len;
  while (end > begin) {
    int32_t prev = end;
    UChar32 c;
    U8_PREV(s, begin, prev, c);
    if (c < 0 || !is_strippable(c)) break;
    end = prev;
  }
  return piece.substr(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin));
}

}  // namespace

std::string normalize_lower(std::string_view text) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  s = to_nfc(s);
  s.toLower(icu::Locale::getRoot());
  // Lowercasing can produce decomposed sequences (e.g. U+0130).
  s = to_nfc(s);
  std::string out;
  s.toUTF8String(out);
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> pieces;
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto len = static_cast<int32_t>(text.size());
  int32_t i = 0;
  int32_t start = -1;
  while (i < len) {
    int32_t at = i;
    UChar32 c;
    U8_NEXT(s, i, len, c);
    bool space = c >= 0 && u_isUWhiteSpace(c);
    if (space) {
      if (start >= 0) {
        pieces.push_back(text.substr(static_cast<std::size_t>(start),
                                     static_cast<std::size_t>(at - start)));
        start = -1;
      }
    } else if (start < 0) {
      start = at;
    }
  }
  if (start >= 0) pieces.push_back(text.substr(static_cast<std::size_t>(start)));
  return pieces;
}

TokenList tokenize(std::string_view text) {
  const std::string lowered = normalize_lower(text);
  TokenList tokens;
  for (std::string_view piece : split_whitespace(lowered)) {
    std::string_view core = strip_punct(piece);
    if (!core.empty()) tokens.emplace_back(core);
  }
  return tokens;
}

TokenList remove_stopwords(const TokenList& tokens, const StopwordSet& stopwords) {
  TokenList out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!stopwords.contains(t)) out.push_back(t);
  }
  return out;
}

TokenList clean(std::string_view text, const StopwordSet& stopwords) {
  return remove_stopwords(tokenize(text), stopwords);
}

StopwordSet parse_stopwords(std::string_view text) {
  std::set<std::string, std::less<>> words;
  for (std::string_view line : detail::split_lines(text)) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    for (std::string_view piece : split_whitespace(line)) {
      words.insert(normalize_lower(piece));
    }
  }
  return StopwordSet(std::move(words));
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
  return parse_stopwords(detail::read_file(path));
}

}  // namespace reqmetric
