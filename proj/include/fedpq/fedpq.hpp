// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fedpq/analysis.hpp"
#include "fedpq/channel.hpp"
#include "fedpq/compress.hpp"
#include "fedpq/config.hpp"
#include "fedpq/data.hpp"
#include "fedpq/energy.hpp"
#include "fedpq/engine.hpp"
#include "fedpq/harness.hpp"
#include "fedpq/model.hpp"
#include "fedpq/objective.hpp"
#include "fedpq/optimizer.hpp"
#include "fedpq/quadrature.hpp"
#include "fedpq/rng.hpp"
