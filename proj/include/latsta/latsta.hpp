#pragma once

#include <string_view>

#include "latsta/error.hpp"
#include "latsta/model.hpp"
#include "latsta/polynomial.hpp"
#include "latsta/protocol.hpp"
#include "latsta/controls.hpp"
#include "latsta/grid.hpp"
#include "latsta/stationary.hpp"
#include "latsta/evolution.hpp"
#include "latsta/ansatz.hpp"
#include "latsta/experiments.hpp"
#include "latsta/verify.hpp"
#include "latsta/config.hpp"

namespace latsta {

inline constexpr std::string_view version = "1.0.0";

}  // namespace latsta
