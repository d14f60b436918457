#pragma once

#include <array>
#include <optional>

#include "didnf/encoding.hpp"

namespace didnf {

// Every frame on the agent transport starts with a 4-byte magic. The three
// magics differ in all four positions, so no single corrupted byte can turn
// one frame kind into another.
enum class FrameKind { v1_envelope, v1_exchange, v2_envelope };

inline constexpr std::array<std::uint8_t, 4> kV1EnvelopeMagic = {0xD1, 0xC0, 0x4D, 0x31};
inline constexpr std::array<std::uint8_t, 4> kV1ExchangeMagic = {0x7E, 0x58, 0xC3, 0x91};
inline constexpr std::array<std::uint8_t, 4> kV2EnvelopeMagic = {0x2E, 0x7B, 0x9A, 0x02};

std::optional<FrameKind> peek_frame_kind(ByteView frame);

}  // namespace didnf
