#pragma once

#include <cstdint>
#include <cmath>

namespace hamlevy {

// Philox 2x64-10 counter-based generator.
//
// One stream per Monte Carlo path: the key is the master seed and the high
// counter word is the path index, so streams are disjoint by construction and
// adding paths never perturbs existing ones.  There is no sequential state
// beyond a block counter, which makes parallel replay trivial.
class CounterRng {
public:
    CounterRng(std::uint64_t master_seed, std::uint64_t stream_index) noexcept
        : key_(master_seed), stream_(stream_index) {}

    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~std::uint64_t{0}; }

    result_type operator()() noexcept {
        if (pos_ == 2) {
            philox_block(block_++, stream_, key_, buf_);
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    // uniform on [0,1), 53-bit resolution
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // uniform on the open interval (0,1); safe under log()
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) noexcept { return a + (b - a) * uniform(); }

    // Exact Poisson sampling.  Multiplication method per chunk; means above 30
    // are split into equal chunks so the e^-lambda threshold never underflows.
    std::uint64_t poisson(double mean) noexcept {
        if (!(mean > 0.0)) return 0;
        std::uint64_t total = 0;
        double remaining = mean;
        while (remaining > 30.0) {
            total += poisson_small_(30.0);
            remaining -= 30.0;
        }
        return total + poisson_small_(remaining);
    }

    static void philox_block(std::uint64_t c0, std::uint64_t c1, std::uint64_t key,
                             std::uint64_t out[2]) noexcept {
        // multiplier and key bump from the reference Philox specification
        constexpr std::uint64_t mult = 0xD2B74407B1CE6E93ULL;
        constexpr std::uint64_t bump = 0x9E3779B97F4A7C15ULL;
        std::uint64_t k = key;
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 prod = static_cast<unsigned __int128>(mult) * c0;
            const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
            const std::uint64_t lo = static_cast<std::uint64_t>(prod);
            c0 = hi ^ k ^ c1;
            c1 = lo;
            k += bump;
        }
        out[0] = c0;
        out[1] = c1;
    }

private:
    std::uint64_t poisson_small_(double mean) noexcept {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform_open();
        while (prod > limit) {
            ++k;
            prod *= uniform_open();
        }
        return k;
    }

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::uint64_t buf_[2] = {0, 0};
    int pos_ = 2;
};

} // namespace hamlevy
