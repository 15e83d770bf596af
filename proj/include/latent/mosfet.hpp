#pragma once

#include "latent/netlist.hpp"

namespace latent {

// Level-1 square-law MOSFET, 3 terminals (drain, gate, source), no
// channel-length modulation. PMOS is evaluated as a mirrored NMOS; a
// drain/source swap handles reverse-biased channels so device orientation
// never matters to the solver.
struct MosfetModel {
    double vto = 0.5; // threshold, negative for PMOS cards
    double kp = 2e-4; // transconductance parameter (A/V^2)
    double w = 0.0;   // 0 means unspecified; W/L ratio defaults to 1
    double l = 0.0;
    bool pmos = false;

    double wl_ratio() const { return (w > 0.0 && l > 0.0) ? w / l : 1.0; }
    double beta() const { return kp * wl_ratio(); }

    static MosfetModel from_element(const Element& e);
};

enum class MosRegion { Cutoff, Triode, Saturation };

// Channel current for forward bias (vds >= 0), NMOS sign convention.
// Exposed so tests can pin the triode/saturation boundary directly.
double square_law_current(const MosfetModel& m, double vgs, double vds);

MosRegion mosfet_region(const MosfetModel& m, double vd, double vg, double vs);

struct MosfetEval {
    double id;     // current into the drain terminal (through the channel)
    double did_vd; // partial derivatives for Newton stamps
    double did_vg;
    double did_vs;
};

// Current and derivatives at the given terminal voltages; goff is a small
// parallel drain-source conductance that keeps otherwise-cutoff devices
// numerically anchored.
MosfetEval mosfet_eval(const MosfetModel& m, double vd, double vg, double vs, double goff);

} // namespace latent
