#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "facil/session.hpp"
#include "facil/types.hpp"

namespace testing {

inline facil::ParticipantId P(int index) { return facil::ParticipantId::from_index(index); }

/// '1'..'4' speak, anything else is silence.
inline std::vector<facil::Speaker> speakers(std::string_view script) {
  std::vector<facil::Speaker> out;
  for (char c : script) {
    if (c >= '1' && c <= '4') out.push_back(P(c - '0'));
    else out.push_back(std::nullopt);
  }
  return out;
}

inline std::vector<facil::Speaker> repeat(facil::Speaker s, int n) { return std::vector<facil::Speaker>(n, s); }

inline void append(std::vector<facil::Speaker>& dst, const std::vector<facil::Speaker>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(gen_); }
  std::mt19937_64& engine() { return gen_; }

  facil::Speaker speaker(double silence_p = 0.2) {
    if (coin(silence_p)) return std::nullopt;
    return P(uniform(1, 4));
  }

 private:
  std::mt19937_64 gen_;
};

inline std::string fixture(const std::string& rel) { return std::string(FACIL_FIXTURES) + "/" + rel; }

}  // namespace testing
