#include "miarn/tokenizer.hpp"

#include <cctype>

namespace miarn::corpus {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_punct(char c) {
  if (c == '#' || c == '@' || c == '_') return false;
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains(std::string_view set, char c) { return set.find(c) != std::string_view::npos; }

}  // namespace

bool is_emoticon(std::string_view s) {
  if (s == "<3" || s == "</3") return true;
  constexpr std::string_view eyes = ":;=8";
  constexpr std::string_view noses = "-o^'";
  constexpr std::string_view mouths = ")](}[({dDpP/\\|3*";

  // [brow] eyes [nose] mouth..., e.g. :) ;-P >:( :)))
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '>' || s[i] == '<')) ++i;
  if (i < s.size() && contains(eyes, s[i])) {
    const char eye = s[i++];
    if (i + 1 < s.size() && contains(noses, s[i])) ++i;
    if (i == s.size() || !contains(mouths, s[i])) return false;
    if (eye == '8' && std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    const char mouth = s[i];
    while (i < s.size() && s[i] == mouth) ++i;
    return i == s.size();
  }
  // reversed, e.g. (: (-;
  if (s.size() < 2 || (s[0] != '(' && s[0] != '[')) return false;
  i = 1;
  if (i + 1 < s.size() && contains(noses, s[i])) ++i;
  return i + 1 == s.size() && contains(":;=", s[i]);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !is_space(text[end])) ++end;
    if (end == pos) break;
    const std::string_view chunk = text.substr(pos, end - pos);
    pos = end;

    if (is_emoticon(chunk)) {
      tokens.emplace_back(chunk);
      continue;
    }
    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(chunk[lead])) ++lead;
    if (lead == chunk.size()) {
      tokens.emplace_back(chunk);
      continue;
    }
    std::size_t tail = chunk.size();
    while (tail > lead && is_punct(chunk[tail - 1])) --tail;

    if (lead > 0) tokens.emplace_back(chunk.substr(0, lead));
    tokens.push_back(lower(chunk.substr(lead, tail - lead)));
    if (tail < chunk.size()) tokens.emplace_back(chunk.substr(tail));
  }
  return tokens;
}

}  // namespace miarn::corpus
