#pragma once

// Error types and small shared utilities.

#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qseg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyQuery : public Error { public: using Error::Error; };
class MalformedLine : public Error { public: using Error::Error; };
class LengthMismatch : public Error { public: using Error::Error; };
class EmptyVocab : public Error { public: using Error::Error; };
class ConfigInvalid : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class DegenerateLabels : public Error { public: using Error::Error; };
class TooLong : public Error { public: using Error::Error; };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent seed for a named sub-stream of `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream));
}

// Fisher-Yates with an explicit draw; std::shuffle's output is not pinned
// by the standard, this one is reproducible everywhere.
template <typename T>
void seeded_shuffle(std::vector<T>& values, std::mt19937_64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(values[i - 1], values[j]);
  }
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Shortest text form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string lowercase_ascii(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

inline std::vector<std::string> split_on_char(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace qseg
