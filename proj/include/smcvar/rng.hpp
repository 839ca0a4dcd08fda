#pragma once

#include <array>
#include <cstdint>
#include <cassert>

namespace smcvar {

// Counter-based RNG (Philox4x32-10). Every consumer owns a stream addressed by
// (seed, replicate, role, stage, particle); streams never overlap and a draw
// depends only on its address, so parallel execution order cannot change results.
struct Philox4x32 {
    using ctr_t = std::array<std::uint32_t, 4>;
    using key_t = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t MUL0 = 0xD2511F53u;
    static constexpr std::uint32_t MUL1 = 0xCD9E8D57u;
    static constexpr std::uint32_t WEYL0 = 0x9E3779B9u;
    static constexpr std::uint32_t WEYL1 = 0xBB67AE85u;

    static ctr_t block(ctr_t ctr, key_t key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += WEYL0;
                key[1] += WEYL1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(MUL0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(MUL1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

enum class StreamRole : std::uint32_t {
    Init = 0,
    Resample = 1,
    Mutate = 2,
    Scalar = 3,    // single-stream consumers (simulations, shuffles)
    Coupling = 4,
};

// One addressed stream: 32-bit draw counter in ctr[0], stage in ctr[1],
// particle in ctr[2], role and replicate packed into ctr[3].
class RngStream {
public:
    RngStream(std::uint64_t seed, StreamRole role, std::uint32_t replicate,
              std::uint32_t stage = 0, std::uint32_t particle = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          base_{0u, stage, particle,
                (static_cast<std::uint32_t>(role) << 24) | (replicate & 0xFFFFFFu)} {
        assert(replicate < (1u << 24) && "replicate id exceeds stream address space");
    }

    std::uint32_t next_u32() {
        if (have_ == 0) {
            auto ctr = base_;
            ctr[0] = draws_++;
            buf_ = Philox4x32::block(ctr, key_);
            have_ = 4;
        }
        return buf_[4 - have_--];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // uniform on [0,1) with 53 random bits
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform on {0, ..., n-1}, exact via rejection
    std::uint32_t next_below(std::uint32_t n) {
        assert(n > 0);
        const std::uint32_t limit = 0xFFFFFFFFu - (0xFFFFFFFFu % n + 1) % n;
        for (;;) {
            const std::uint32_t v = next_u32();
            if (v <= limit) return v % n;
        }
    }

private:
    Philox4x32::key_t key_;
    Philox4x32::ctr_t base_;
    Philox4x32::ctr_t buf_{};
    std::uint32_t draws_ = 0;
    int have_ = 0;
};

} // namespace smcvar
