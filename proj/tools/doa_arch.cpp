// SPDX-License-Identifier: Apache-2.0
#include <csignal>

#include "doa/cancel.hpp"
#include "doa/cli.hpp"

namespace {
extern "C" void on_sigint(int) { doa::request_cancel(); }
}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);
  return doa::run_cli(argc, argv);
}
