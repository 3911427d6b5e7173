#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace yarnlab {

std::string sha256_hex(std::string_view bytes);

// Deterministic 64-bit generator (splitmix64). All reproducible randomness in
// the toolkit goes through this; std:: distributions are not guaranteed to
// produce identical streams across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, n). Lemire reduction, fixed algorithm.
  std::uint64_t uniform(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream seed from a base seed and a stream tag.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed ^ (0x6a09e667f3bcc909ULL + stream * 0x3c6ef372fe94f82bULL));
    return r.next_u64();
  }

 private:
  std::uint64_t state_;
};

std::vector<std::string> split_whitespace(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

// ASCII-only lowercasing; bytes >= 0x80 pass through untouched.
std::string ascii_fold(std::string_view s);

// Strips leading/trailing ASCII punctuation.
std::string strip_outer_punct(std::string_view s);

// Splits a UTF-8 string into code points, dropping whitespace.
std::vector<std::string> utf8_codepoints(std::string_view s);

std::string read_text_file(const std::string& path);  // throws IoError
void write_text_file(const std::string& path, std::string_view content);

}  // namespace yarnlab
