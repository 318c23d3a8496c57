#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace reload {

using Rng = std::mt19937_64;

//! splitmix64 finalizer; used to derive independent seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

//! Derives a seed for a named stream (e.g. execution of query q at iteration i).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
	std::uint64_t s = mix_seed(base);
	for (auto p : parts) {
		s = mix_seed(s ^ mix_seed(p));
	}
	return s;
}

inline double uniform_real(Rng &rng, double lo, double hi) {
	return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(Rng &rng, std::size_t n) {
	return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

} // namespace reload
