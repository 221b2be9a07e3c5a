#pragma once

#include "saws/closeness.hpp"
#include "saws/common.hpp"
#include "saws/domain.hpp"
#include "saws/engine.hpp"
#include "saws/envgen.hpp"
#include "saws/harness.hpp"
#include "saws/problems.hpp"
#include "saws/rng.hpp"
#include "saws/segmentation.hpp"
#include "saws/solver.hpp"
