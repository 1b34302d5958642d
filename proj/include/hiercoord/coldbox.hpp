#pragma once

// Cold-box surrogate: Joule-Thomson cycle (JT), two heat-exchanger blocks
// (NEF2, NEF34) and the Brayton turbine (T1), sampled at 5 s.

#include "hiercoord/closed_loop.hpp"

namespace hiercoord {

PlantSpec coldbox_plant();

/// S1 = JT, S2 = NEF2 + NEF34 + T1.
BenchmarkConfig build_coldbox_2ss();
/// One subsystem per unit.
BenchmarkConfig build_coldbox_4ss();

}  // namespace hiercoord
