// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>

#include "doa/errors.hpp"

namespace doa {

inline std::atomic<bool>& cancel_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void request_cancel() { cancel_flag().store(true); }
inline bool cancel_requested() { return cancel_flag().load(); }

inline void throw_if_cancelled() {
  if (cancel_requested()) throw Cancelled();
}

}  // namespace doa
