// SPDX-License-Identifier: MIT
/**
 * Counter-based random streams.
 *
 * A stream is identified by a 64-bit key; its i-th output is a bijective
 * mix of key + i * golden-ratio increment (the SplitMix64 construction), so
 * any stream can be reproduced from its key alone.  Keys of child streams
 * are derived from the parent key and a slot number, which makes every
 * particle's randomness a function of its genealogical label only.
 *
 * Variates are produced with Boost.Random's distributions, whose algorithms
 * are fixed across platforms (unlike the std:: ones).
 */
#pragma once

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cstdint>
#include <limits>

namespace rbbm {

/// Finaliser of MurmurHash3; a bijection on 64-bit words.
constexpr std::uint64_t fmix64(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

/// Key of the index-th child stream of key (documented counter hash).
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t index) {
    return fmix64(key ^ fmix64(0xd1b54a32d192ed03ULL * (index + 1)));
}

class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        std::uint64_t z = key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (double((*this)() >> 11) + 0.5) * 0x1.0p-53; }
    double normal() { return boost::random::normal_distribution<double>()(*this); }
    double exponential(double rate) {
        return boost::random::exponential_distribution<double>(rate)(*this);
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

} // namespace rbbm
