#pragma once

#include <gransim/util/Bytes.h>

#include <cstdint>
#include <random>
#include <vector>

namespace gransim::test {

// Small seeded generator helper for property tests
class Gen
{
  public:
    explicit Gen(uint64_t seed)
      : rng(seed)
    {}

    int64_t intIn(int64_t lo, int64_t hi)
    {
        return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
    }

    size_t index(size_t n) { return static_cast<size_t>(intIn(0, n - 1)); }

    bool chance(double p) { return std::bernoulli_distribution(p)(rng); }

    double real(double lo, double hi)
    {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }

    template<typename T>
    T any()
    {
        if constexpr (std::is_integral_v<T>) {
            return static_cast<T>(rng());
        } else {
            return static_cast<T>(real(-1e6, 1e6));
        }
    }

    Bytes bytes(size_t n)
    {
        Bytes out(n);
        for (auto& b : out) {
            b = static_cast<uint8_t>(rng());
        }
        return out;
    }

    std::mt19937_64& engine() { return rng; }

  private:
    std::mt19937_64 rng;
};

}
