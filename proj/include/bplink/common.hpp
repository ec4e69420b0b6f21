#pragma once

#include <cstdint>

namespace bplink {

using i64 = std::int64_t;
using u64 = std::uint64_t;

// Default tail mass allowed to be dropped when truncating an infinite support.
inline constexpr double kDefaultTailTol = 1e-12;

// Default cap on the width of any truncated support; exceeding it raises
// SupportOverflowError.
inline constexpr i64 kDefaultSupportCap = i64(1) << 21;

}  // namespace bplink
