#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nlufix {

enum class Normalization { Exact, FoldCaseAndWhitespace };

std::vector<std::string> split_whitespace(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep = " ");

std::string to_lower_ascii(std::string_view text);
std::string to_upper_ascii(std::string_view text);

// Exact leaves the text untouched. FoldCaseAndWhitespace lowercases ASCII,
// trims, and collapses runs of whitespace to a single space.
std::string normalize_text(std::string_view text, Normalization mode);

const char* to_string(Normalization mode);
Normalization normalization_from_string(std::string_view name);

// 64-bit FNV-1a. Stable across platforms, used for ids and seed derivation.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

} // namespace nlufix
