#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace widelimit {

// Philox4x32-10. Stateless apart from the counter, so any (key, counter)
// position can be reached in O(1).
class Philox {
public:
    using result_type = std::uint32_t;
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key);

    Philox() : Philox(0, 0) {}
    Philox(std::uint64_t key, std::uint64_t stream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();
    // Uniform on (0, 1); never returns 0 or 1.
    double uniform();
    void discard(std::uint64_t n);

private:
    void refill();

    Key key_{};
    Counter ctr_{};
    Counter buf_{};
    int pos_ = 4;
};

std::uint64_t splitmix64(std::uint64_t x);

// Independent key for (master seed, draw index). Layers and other sub-streams
// go into the counter's high words via the Philox stream argument.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace widelimit
