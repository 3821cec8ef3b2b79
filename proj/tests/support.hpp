#pragma once

#include "failprompt/error.hpp"
#include "failprompt/gradcheck.hpp"

namespace fp_test {

using namespace failprompt;

template <typename F>
bool throws_code(F&& f, ErrorCode code) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

}  // namespace fp_test
