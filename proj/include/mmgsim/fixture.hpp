#pragma once

#include "mmgsim/plant.hpp"

namespace mmgsim {

struct FixtureResult {
    double phi_rad = 0.0;          ///< tie transfer angle at the design point
    Complex s_extra;               ///< additional phase-A load (W, var)
    Complex pcc_load_a;            ///< base phase-A load merged with s_extra
    double source_emf_peak = 0.0;  ///< feeder EMF holding nominal volts at rated load
    double vuf_pct = 0.0;          ///< open-loop unbalance the design produces
};

/// Designs an unbalanced-load operating point the controllers can fully
/// rebalance. The feeder EMF is sized so a feeder at rated balanced load
/// holds nominal voltage; the extra phase-A load is placed exactly on the
/// tie line's equal-voltage-magnitude transfer locus, so at the regulated
/// operating point the tie imports the extra load in full and every feeder
/// returns to its rated delivery. The transfer angle is bisected until the
/// open-loop (controllers off) unbalance hits `target_vuf_pct`.
FixtureResult design_unbalance_fixture(const PlantParams& base, double target_vuf_pct,
                                       double tolerance_pct = 0.1);

}  // namespace mmgsim
