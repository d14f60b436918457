#include "didnf/error.hpp"

namespace didnf {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::syntax: return "syntax";
    case Errc::not_found: return "not-found";
    case Errc::already_exists: return "already-exists";
    case Errc::unauthorized: return "unauthorized";
    case Errc::integrity: return "integrity";
    case Errc::protocol_state: return "protocol-state";
    case Errc::validation: return "validation";
    case Errc::key_mismatch: return "key-mismatch";
    case Errc::misdelivery: return "misdelivery";
    case Errc::format: return "format";
    case Errc::startup: return "startup";
    case Errc::delivery: return "delivery";
    case Errc::io: return "io";
  }
  return "unknown";
}

std::optional<Errc> errc_from_string(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(Errc::io); ++i) {
    if (to_string(static_cast<Errc>(i)) == text) return static_cast<Errc>(i);
  }
  return std::nullopt;
}

}  // namespace didnf
