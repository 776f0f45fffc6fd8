// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "doa/errors.hpp"
#include "doa/label_codec.hpp"
#include "doa/losses.hpp"
#include "doa/objective.hpp"
#include "doa/sim.hpp"
#include "doa/net.hpp"
#include "doa/eval.hpp"
#include "doa/verify.hpp"
