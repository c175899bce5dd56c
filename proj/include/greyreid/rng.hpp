#ifndef GREYREID_RNG_HPP_
#define GREYREID_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace greyreid {

// Independent stream keyed by (seed, tags...). Every random decision in
// the pipeline is drawn from a stream derived this way, so results depend
// only on the keys and never on call order across workers.
inline std::mt19937_64 derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Stream tags.
enum RngTag : std::uint64_t {
  kTagInit = 1,
  kTagSampler = 2,
  kTagAugment = 3,
  kTagToy = 4,
};

}  // namespace greyreid

#endif  // GREYREID_RNG_HPP_
