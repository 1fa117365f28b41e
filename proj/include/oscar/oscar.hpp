#pragma once

// One-shot per-sequence Markov Boundary discovery for multi-label event
// sequences, with a synthetic ground-truth generator and evaluation harness.

#include "oscar/core.hpp"
#include "oscar/density.hpp"
#include "oscar/engine.hpp"
#include "oscar/eval.hpp"
#include "oscar/export_dot.hpp"
#include "oscar/io.hpp"
#include "oscar/rng.hpp"
#include "oscar/synthgen.hpp"
