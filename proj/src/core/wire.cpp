#include "didnf/wire.hpp"

#include <algorithm>

namespace didnf {

std::optional<FrameKind> peek_frame_kind(ByteView frame) {
  if (frame.size() < 4) return std::nullopt;
  auto head = frame.first(4);
  auto is = [&](const auto& magic) { return std::equal(magic.begin(), magic.end(), head.begin()); };
  if (is(kV1EnvelopeMagic)) return FrameKind::v1_envelope;
  if (is(kV1ExchangeMagic)) return FrameKind::v1_exchange;
  if (is(kV2EnvelopeMagic)) return FrameKind::v2_envelope;
  return std::nullopt;
}

}  // namespace didnf
