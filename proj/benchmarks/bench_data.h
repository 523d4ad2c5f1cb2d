#pragma once

#include <cstdio>
#include <random>
#include <string>

#include "q2q/corpus_io.h"

namespace q2q::bench {

// Zipf-ish synthetic passages: low word ids are far more frequent.
inline PassageStore synthetic_corpus(std::size_t passages, std::size_t vocabulary, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PassageStore store;
  char id[32];
  for (std::size_t i = 0; i < passages; ++i) {
    std::string text;
    for (std::size_t t = 0; t < length; ++t) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const auto word = static_cast<std::size_t>(static_cast<double>(vocabulary) * u * u * u);
      text += "w" + std::to_string(word) + ' ';
    }
    std::snprintf(id, sizeof id, "p%07zu", i);
    store.add({id, text});
  }
  return store;
}

inline std::string synthetic_query(std::mt19937_64& rng, std::size_t vocabulary, std::size_t length) {
  std::string q;
  for (std::size_t t = 0; t < length; ++t) q += "w" + std::to_string(rng() % vocabulary) + ' ';
  return q;
}

}  // namespace q2q::bench
