#include "difflab/rng.hpp"

#include <algorithm>

namespace difflab {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t label_hash(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t label : labels) h = mix64(h ^ mix64(label + 0x632be59bd9b4e019ULL));
  return h;
}

Stream::Stream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

double Stream::normal() { return normal_(engine_); }

double Stream::uniform() { return uniform_(engine_); }

Vector Stream::normal_vector(int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal_(engine_);
  return v;
}

std::size_t Stream::categorical(const std::vector<double>& cumulative) {
  const double u = uniform_(engine_) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

Stream substream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
  return Stream(derive_seed(seed, labels));
}

}  // namespace difflab
