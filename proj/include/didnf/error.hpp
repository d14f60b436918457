#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace didnf {

enum class Errc {
  syntax,
  not_found,
  already_exists,
  unauthorized,
  integrity,
  protocol_state,
  validation,
  key_mismatch,
  misdelivery,
  format,
  startup,
  delivery,
  io,
};

std::string_view to_string(Errc code);
std::optional<Errc> errc_from_string(std::string_view text);

// Every failure in the library surfaces as an Error carrying a machine-readable
// code; the message is for humans only.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace didnf
