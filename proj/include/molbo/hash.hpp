#ifndef MOLBO_HASH_HPP
#define MOLBO_HASH_HPP

#include <cstdint>
#include <string_view>

namespace molbo {

// FNV-1a over a little-endian byte encoding, finished with the MurmurHash3
// 64-bit finalizer. Byte order is fixed in software so results do not depend
// on host endianness.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fmix64(std::uint64_t k) noexcept {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

class Hasher {
public:
    constexpr Hasher() noexcept = default;

    constexpr Hasher& byte(std::uint8_t b) noexcept {
        state_ ^= b;
        state_ *= kFnvPrime;
        return *this;
    }

    constexpr Hasher& u64(std::uint64_t v) noexcept {
        for (int i = 0; i < 8; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }

    constexpr Hasher& i64(std::int64_t v) noexcept { return u64(static_cast<std::uint64_t>(v)); }

    constexpr Hasher& bytes(std::string_view s) noexcept {
        u64(s.size());
        for (char c : s) byte(static_cast<std::uint8_t>(c));
        return *this;
    }

    constexpr std::uint64_t digest() const noexcept { return fmix64(state_); }

private:
    std::uint64_t state_ = kFnvOffset;
};

} // namespace molbo

#endif
