#pragma once

#include <cstdint>
#include <string_view>

namespace cbtsim {

// Virtual time in microseconds. All protocol math is integral so that runs
// are bit-reproducible across platforms.
using Time = std::int64_t;

constexpr Time kMicrosPerMilli = 1000;
constexpr Time kMicrosPerSecond = 1000 * 1000;

constexpr Time ms(std::int64_t v) { return v * kMicrosPerMilli; }
constexpr Time seconds(std::int64_t v) { return v * kMicrosPerSecond; }

// Transaction identifier; dense 1..n within a run, unique across the run.
using Uuid = std::uint64_t;

// Abstract currency units. Signed: legs carry deltas.
using Amount = std::int64_t;

using BlockId = std::uint64_t;

// 1-based blockchain index within the consortium.
struct ChainId {
  std::uint32_t index = 0;

  // 0-based position for container access.
  std::size_t idx() const { return index - 1; }
  bool valid() const { return index >= 1; }

  friend bool operator==(ChainId a, ChainId b) { return a.index == b.index; }
  friend bool operator!=(ChainId a, ChainId b) { return a.index != b.index; }
  friend bool operator<(ChainId a, ChainId b) { return a.index < b.index; }
};

struct NodeId {
  ChainId chain;
  std::uint32_t ordinal = 0;  // 0-based within the chain's node set

  friend bool operator==(NodeId a, NodeId b) {
    return a.chain == b.chain && a.ordinal == b.ordinal;
  }
  friend bool operator!=(NodeId a, NodeId b) { return !(a == b); }
};

struct EntityId {
  ChainId chain;
  std::uint32_t account = 0;  // 0-based within entities_per_chain

  friend bool operator==(EntityId a, EntityId b) {
    return a.chain == b.chain && a.account == b.account;
  }
  friend bool operator!=(EntityId a, EntityId b) { return !(a == b); }
};

// FNV-1a, used for block ids, config digests, and trace hashing.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) {
  return fnv1a(h, &v, sizeof(v));
}

inline std::uint64_t fnv1a_str(std::uint64_t h, std::string_view s) {
  return fnv1a(h, s.data(), s.size());
}

}  // namespace cbtsim
