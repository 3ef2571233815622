#pragma once

#include "chainlog.hpp"
#include "data.hpp"
#include "dists.hpp"
#include "error.hpp"
#include "mcmc.hpp"
#include "measures.hpp"
#include "models.hpp"
#include "numeric.hpp"
#include "random.hpp"
#include "simstudy.hpp"
#include "tails.hpp"

namespace htpy {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace htpy
