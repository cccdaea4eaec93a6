#pragma once

#include <stdexcept>
#include <string>

namespace hvtr {

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace hvtr
