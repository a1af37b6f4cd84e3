#include "nlufix/text.hpp"

#include "nlufix/error.hpp"

#include <cctype>
#include <cstdio>

namespace nlufix {

namespace {
bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
} // namespace

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += sep;
        out += tokens[i];
    }
    return out;
}

std::string to_lower_ascii(std::string_view text) {
    std::string out(text);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string to_upper_ascii(std::string_view text) {
    std::string out(text);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string normalize_text(std::string_view text, Normalization mode) {
    if (mode == Normalization::Exact) return std::string(text);
    return to_lower_ascii(join_tokens(split_whitespace(text)));
}

const char* to_string(Normalization mode) {
    return mode == Normalization::Exact ? "exact" : "fold_case_and_whitespace";
}

Normalization normalization_from_string(std::string_view name) {
    if (name == "exact") return Normalization::Exact;
    if (name == "fold_case_and_whitespace" || name == "fold") return Normalization::FoldCaseAndWhitespace;
    throw ConfigError("unknown normalization '" + std::string(name) + "'");
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

} // namespace nlufix
