#include "lrm/analysis.hpp"

#include <fstream>
#include <stdexcept>

#include "lrm/error.hpp"

namespace lrm {
namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one UTF-8 sequence at text[pos]; malformed bytes yield kInvalid and
// advance by one.
char32_t next_codepoint(std::string_view text, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  int len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++pos;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return kInvalid;
  }
  if (pos + static_cast<std::size_t>(len) > text.size()) {
    ++pos;
    return kInvalid;
  }
  for (int i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + static_cast<std::size_t>(i)]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += static_cast<std::size_t>(len);
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

// Letters and digits. ASCII and Latin-1 are classified exactly; above that,
// the punctuation, symbol, space and emoji blocks are excluded and everything
// else counts as a word character.
bool is_word_char(char32_t cp) {
  if (cp == kInvalid) return false;
  if (cp < 0x80)
    return in(cp, U'0', U'9') || in(cp, U'a', U'z') || in(cp, U'A', U'Z');
  if (cp < 0x100)
    return cp == 0xAA || cp == 0xB2 || cp == 0xB3 || cp == 0xB5 || cp == 0xB9 || cp == 0xBA ||
           in(cp, 0xBC, 0xBE) || (cp >= 0xC0 && cp != 0xD7 && cp != 0xF7);
  if (in(cp, 0x2000, 0x2BFF)) return false;  // punctuation, symbols, arrows, math, boxes
  if (in(cp, 0x2E00, 0x2E7F)) return false;  // supplemental punctuation
  if (in(cp, 0x3000, 0x303F)) return false;  // CJK symbols and punctuation
  if (in(cp, 0xD800, 0xDFFF)) return false;  // surrogates
  if (in(cp, 0xFE10, 0xFE1F) || in(cp, 0xFE30, 0xFE4F)) return false;
  if (in(cp, 0xFF00, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) || in(cp, 0xFF3B, 0xFF40) ||
      in(cp, 0xFF5B, 0xFF65))
    return false;  // fullwidth punctuation
  if (in(cp, 0xFFF0, 0xFFFF)) return false;
  if (in(cp, 0x1F000, 0x1FAFF)) return false;  // emoji and pictographs
  return true;
}

char32_t to_lower(char32_t cp) {
  if (in(cp, U'A', U'Z')) return cp + 32;
  if (cp < 0x80) return cp;
  if (in(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 32;
  if (in(cp, 0x100, 0x137) || in(cp, 0x14A, 0x177)) return (cp % 2 == 0) ? cp + 1 : cp;
  if (in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17E)) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (in(cp, 0x391, 0x3A9) && cp != 0x3A2) return cp + 32;  // Greek
  if (in(cp, 0x410, 0x42F)) return cp + 32;                  // Cyrillic
  if (in(cp, 0x400, 0x40F)) return cp + 80;
  return cp;
}

}  // namespace

TokenList Analyzer::tokenize(std::string_view text) const {
  TokenList tokens;
  std::string current;
  std::size_t chars = 0;
  auto flush = [&] {
    if (!current.empty() && !stopwords_.contains(current)) tokens.push_back(current);
    current.clear();
    chars = 0;
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = next_codepoint(text, pos);
    if (!is_word_char(cp)) {
      flush();
      continue;
    }
    if (chars == kMaxTokenChars) continue;
    append_utf8(current, lowercase_ ? to_lower(cp) : cp);
    ++chars;
  }
  flush();
  return tokens;
}

std::unordered_set<std::string> load_stopwords(const std::string& path, bool lowercase) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file " + path);
  Analyzer folding(lowercase, {});
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& token : folding.tokenize(line)) words.insert(std::move(token));
  }
  return words;
}

TermDictionary::TermDictionary(std::vector<std::string> terms) {
  for (auto& t : terms) {
    if (ids_.contains(t)) throw DataError("duplicate dictionary term: " + t);
    ids_.emplace(t, static_cast<TermId>(terms_.size()));
    terms_.push_back(std::move(t));
  }
}

TermId TermDictionary::intern(std::string_view term) {
  if (auto it = ids_.find(term); it != ids_.end()) return it->second;
  if (frozen_) throw std::logic_error("TermDictionary: intern after freeze");
  auto id = static_cast<TermId>(terms_.size());
  terms_.emplace_back(term);
  ids_.emplace(terms_.back(), id);
  return id;
}

std::optional<TermId> TermDictionary::lookup(std::string_view term) const {
  if (auto it = ids_.find(term); it != ids_.end()) return it->second;
  return std::nullopt;
}

}  // namespace lrm
