#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

namespace defeat {

// Rounds to two decimal places, the precision every prompt-visible value
// carries once rendered. Negative zero normalizes to plain zero.
inline double round2(double v) {
  const double r = std::round(v * 100.0) / 100.0;
  return r == 0.0 ? 0.0 : r;
}

// Fixed two-decimal formatting, locale-independent.
inline std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

// Distances render with minimal digits: "103", "92.7", "92.75".
inline std::string fmt_minimal(double v) {
  const double r = round2(v);
  if (std::abs(r - std::round(r)) < 1e-9) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::llround(r)));
    return std::string(buf);
  }
  const double r1 = std::round(r * 10.0) / 10.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), std::abs(r - r1) < 1e-9 ? "%.1f" : "%.2f", r);
  return std::string(buf);
}

// Lane counts render as words in the map sentence ("a four-lane highway").
inline std::string number_word(int n) {
  static constexpr const char* words[] = {"zero", "one",   "two",   "three", "four",
                                          "five", "six",   "seven", "eight", "nine",
                                          "ten",  "eleven", "twelve"};
  if (n >= 0 && n <= 12) return words[n];
  return std::to_string(n);
}

inline std::string ordinal(int n) {
  const int mod100 = n % 100;
  const char* suffix = "th";
  if (mod100 < 11 || mod100 > 13) {
    switch (n % 10) {
      case 1: suffix = "st"; break;
      case 2: suffix = "nd"; break;
      case 3: suffix = "rd"; break;
      default: break;
    }
  }
  return std::to_string(n) + suffix;
}

// Locale-independent double parse; returns false on malformed input.
inline bool parse_double(std::string_view text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr != first;
}

}  // namespace defeat
