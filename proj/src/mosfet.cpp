#include "latent/mosfet.hpp"

namespace latent {

MosfetModel MosfetModel::from_element(const Element& e) {
    MosfetModel m;
    m.pmos = e.kind == ElementKind::Pmos;
    m.vto = e.param_or("Vto", m.pmos ? -0.5 : 0.5);
    m.kp = e.param_or("Kp", m.pmos ? 1e-4 : 2e-4);
    m.w = e.param_or("W", 0.0);
    m.l = e.param_or("L", 0.0);
    return m;
}

double square_law_current(const MosfetModel& m, double vgs, double vds) {
    const double vto = m.pmos ? -m.vto : m.vto;
    const double vov = vgs - vto;
    if (vov <= 0.0) return 0.0;
    const double beta = m.beta();
    if (vds < vov) return beta * (vov * vds - 0.5 * vds * vds); // triode
    return 0.5 * beta * vov * vov;                              // saturation
}

namespace {

struct ForwardEval {
    double id, gm, gds; // dId/dVgs, dId/dVds at vds >= 0
};

ForwardEval forward(double beta, double vov, double vds) {
    if (vov <= 0.0) return {0.0, 0.0, 0.0};
    if (vds < vov) {
        return {beta * (vov * vds - 0.5 * vds * vds), beta * vds, beta * (vov - vds)};
    }
    return {0.5 * beta * vov * vov, beta * vov, 0.0};
}

} // namespace

MosRegion mosfet_region(const MosfetModel& m, double vd, double vg, double vs) {
    // Mirror PMOS onto NMOS, then swap drain/source if the channel is
    // reverse biased.
    const double sign = m.pmos ? -1.0 : 1.0;
    double d = sign * vd, g = sign * vg, s = sign * vs;
    if (d < s) std::swap(d, s);
    const double vov = (g - s) - (m.pmos ? -m.vto : m.vto);
    if (vov <= 0.0) return MosRegion::Cutoff;
    if ((d - s) < vov) return MosRegion::Triode;
    return MosRegion::Saturation;
}

MosfetEval mosfet_eval(const MosfetModel& m, double vd, double vg, double vs, double goff) {
    const double sign = m.pmos ? -1.0 : 1.0;
    const double vto = m.pmos ? -m.vto : m.vto;
    const double beta = m.beta();

    // Work in the mirrored frame (PMOS voltages negated).
    const double d = sign * vd, g = sign * vg, s = sign * vs;

    double id_m, did_d, did_g, did_s; // mirrored-frame current into drain
    if (d >= s) {
        const auto f = forward(beta, g - s - vto, d - s);
        id_m = f.id;
        did_d = f.gds;
        did_g = f.gm;
        did_s = -(f.gm + f.gds);
    } else {
        // Reverse bias: the physical source acts as the channel drain.
        const auto f = forward(beta, g - d - vto, s - d);
        id_m = -f.id;
        did_s = -f.gds;
        did_g = -f.gm;
        did_d = f.gm + f.gds;
    }

    // Un-mirror: i = sign * id_m(sign*v...), so derivatives keep their sign.
    MosfetEval out;
    out.id = sign * id_m + goff * (vd - vs);
    out.did_vd = did_d + goff;
    out.did_vg = did_g;
    out.did_vs = did_s - goff;
    return out;
}

} // namespace latent
