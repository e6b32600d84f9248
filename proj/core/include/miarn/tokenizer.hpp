#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace miarn::corpus {

/**
 * Rule-based tweet tokenizer.
 *
 * Text is split on whitespace and lowercased. Within each chunk a leading
 * and a trailing run of punctuation become tokens of their own ("yay!!!" ->
 * "yay", "!!!"), while chunks that are entirely punctuation ("!!", "...")
 * and emoticons (":)", ";-P", "<3") stay whole. '#', '@' and '_' count as
 * word characters, so hashtags and mentions survive intact.
 */
std::vector<std::string> tokenize(std::string_view text);

bool is_emoticon(std::string_view chunk);

}  // namespace miarn::corpus
