// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "wavemin/core.hpp"
#include "wavemin/moduli.hpp"
#include "wavemin/mesh.hpp"
#include "wavemin/fields.hpp"
#include "wavemin/functional.hpp"
#include "wavemin/solver.hpp"
#include "wavemin/hs.hpp"
#include "wavemin/quadrature.hpp"
#include "wavemin/greens.hpp"
#include "wavemin/io.hpp"
