#pragma once

#include <gtest/gtest.h>

#include "didnf/error.hpp"
#include "didnf/identity.hpp"
#include "didnf/vdr.hpp"

namespace didnf::testing {

template <typename Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::io;
}

inline Identity registered_identity(Vdr& vdr, std::string endpoint = "http://127.0.0.1:1/didcomm") {
  auto id = generate_identity("sba", endpoint);
  vdr.register_document(id.document, prove_document(id, id.document, 1));
  id.document.version = 1;
  return id;
}

}  // namespace didnf::testing
