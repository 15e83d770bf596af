#include "latent/simulator.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "latent/mosfet.hpp"
#include "latent/spice_value.hpp"

namespace latent {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

using Triplets = std::vector<Eigen::Triplet<double>>;

// MNA layout: one unknown per non-ground node (inventory order), one branch
// current per voltage source appended after the nodes.
struct MnaSystem {
    const Netlist& netlist;
    const SimOptions& opts;
    std::vector<std::string> nodes;
    std::map<std::string, int> node_of; // ground -> -1
    std::vector<int> vsrc_branch;       // per element, -1 if not a vsrc
    int nv = 0;
    int dim = 0;
    std::map<std::string, double> overrides;

    MnaSystem(const Netlist& n, const SimOptions& o,
              const std::map<std::string, double>& fixed_inputs)
        : netlist(n), opts(o), overrides(fixed_inputs) {
        nodes = node_inventory(n);
        nv = static_cast<int>(nodes.size());
        for (int i = 0; i < nv; ++i) node_of[nodes[i]] = i;
        node_of[Netlist::kGround] = -1;
        int branch = nv;
        vsrc_branch.assign(n.elements.size(), -1);
        for (std::size_t k = 0; k < n.elements.size(); ++k)
            if (n.elements[k].kind == ElementKind::VoltageSource)
                vsrc_branch[k] = branch++;
        dim = branch;
    }

    double source_value(const Element& e) const {
        auto it = overrides.find(e.id);
        return it != overrides.end() ? it->second : e.param_or("DC", 0.0);
    }

    double v_at(const Eigen::VectorXd& x, int idx) const { return idx < 0 ? 0.0 : x[idx]; }

    // Residual F(x) and Jacobian J(x). Node rows sum currents leaving the
    // node; vsrc rows enforce v+ - v- = E. src_scale scales all independent
    // sources (source stepping), gmin adds a conductance from every node to
    // ground (gmin stepping).
    void assemble(const Eigen::VectorXd& x, double gmin, double src_scale,
                  Triplets& jac, Eigen::VectorXd& f) const {
        jac.clear();
        f.setZero(dim);

        auto stamp_conductance = [&](int a, int b, double g) {
            if (a >= 0) {
                jac.emplace_back(a, a, g);
                if (b >= 0) jac.emplace_back(a, b, -g);
            }
            if (b >= 0) {
                jac.emplace_back(b, b, g);
                if (a >= 0) jac.emplace_back(b, a, -g);
            }
        };
        auto add_current = [&](int node, double i) {
            if (node >= 0) f[node] += i;
        };

        for (std::size_t k = 0; k < netlist.elements.size(); ++k) {
            const Element& e = netlist.elements[k];
            const int a = node_of.at(e.nodes[0]);
            const int b = node_of.at(e.nodes.size() > 1 ? e.nodes[1] : e.nodes[0]);
            switch (e.kind) {
            case ElementKind::Resistor: {
                const double g = 1.0 / e.params.at("R");
                const double i = g * (v_at(x, a) - v_at(x, b));
                add_current(a, i);
                add_current(b, -i);
                stamp_conductance(a, b, g);
                break;
            }
            case ElementKind::Capacitor: {
                const double g = opts.cap_gmin;
                const double i = g * (v_at(x, a) - v_at(x, b));
                add_current(a, i);
                add_current(b, -i);
                stamp_conductance(a, b, g);
                break;
            }
            case ElementKind::CurrentSource: {
                const double i = src_scale * source_value(e);
                add_current(a, i);
                add_current(b, -i);
                break;
            }
            case ElementKind::VoltageSource: {
                const int br = vsrc_branch[k];
                const double iv = x[br];
                add_current(a, iv);
                add_current(b, -iv);
                if (a >= 0) jac.emplace_back(a, br, 1.0);
                if (b >= 0) jac.emplace_back(b, br, -1.0);
                f[br] = v_at(x, a) - v_at(x, b) - src_scale * source_value(e);
                if (a >= 0) jac.emplace_back(br, a, 1.0);
                if (b >= 0) jac.emplace_back(br, b, -1.0);
                break;
            }
            case ElementKind::Nmos:
            case ElementKind::Pmos: {
                const int d = node_of.at(e.nodes[0]);
                const int g = node_of.at(e.nodes[1]);
                const int s = node_of.at(e.nodes[2]);
                const auto m = MosfetModel::from_element(e);
                const auto ev = mosfet_eval(m, v_at(x, d), v_at(x, g), v_at(x, s),
                                            opts.mosfet_goff);
                add_current(d, ev.id);
                add_current(s, -ev.id);
                auto stamp_row = [&](int row, double sign) {
                    if (row < 0) return;
                    if (d >= 0) jac.emplace_back(row, d, sign * ev.did_vd);
                    if (g >= 0) jac.emplace_back(row, g, sign * ev.did_vg);
                    if (s >= 0) jac.emplace_back(row, s, sign * ev.did_vs);
                };
                stamp_row(d, 1.0);
                stamp_row(s, -1.0);
                break;
            }
            }
        }
        if (gmin > 0.0)
            for (int i = 0; i < nv; ++i) {
                f[i] += gmin * x[i];
                jac.emplace_back(i, i, gmin);
            }
    }

    std::vector<double> element_currents(const Eigen::VectorXd& x) const {
        std::vector<double> out(netlist.elements.size(), 0.0);
        for (std::size_t k = 0; k < netlist.elements.size(); ++k) {
            const Element& e = netlist.elements[k];
            switch (e.kind) {
            case ElementKind::Resistor: {
                const int a = node_of.at(e.nodes[0]);
                const int b = node_of.at(e.nodes[1]);
                out[k] = (v_at(x, a) - v_at(x, b)) / e.params.at("R");
                break;
            }
            case ElementKind::Capacitor:
                out[k] = 0.0; // open at DC by definition
                break;
            case ElementKind::CurrentSource:
                out[k] = source_value(e);
                break;
            case ElementKind::VoltageSource:
                out[k] = x[vsrc_branch[k]];
                break;
            case ElementKind::Nmos:
            case ElementKind::Pmos: {
                const int d = node_of.at(e.nodes[0]);
                const int g = node_of.at(e.nodes[1]);
                const int s = node_of.at(e.nodes[2]);
                const auto m = MosfetModel::from_element(e);
                out[k] = mosfet_eval(m, v_at(x, d), v_at(x, g), v_at(x, s),
                                     opts.mosfet_goff).id;
                break;
            }
            }
        }
        return out;
    }
};

struct NewtonOutcome {
    bool converged = false;
    bool singular = false;
    int iterations = 0;
    double residual = std::numeric_limits<double>::infinity();
};

double inf_norm(const Eigen::VectorXd& v) {
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

NewtonOutcome newton_solve(const MnaSystem& sys, Eigen::VectorXd& x, double gmin,
                           double src_scale, const SimOptions& opts) {
    Triplets trip;
    Eigen::VectorXd f(sys.dim);
    Eigen::SparseMatrix<double> jac(sys.dim, sys.dim);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;

    NewtonOutcome out;
    double last_step = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iter; ++it) {
        sys.assemble(x, gmin, src_scale, trip, f);
        const double res = inf_norm(f);
        out.residual = std::min(out.residual, res);
        out.iterations = it;
        if (res <= opts.tol_res && last_step <= opts.tol_dv) {
            out.converged = true;
            return out;
        }
        jac.setFromTriplets(trip.begin(), trip.end());
        lu.compute(jac);
        if (lu.info() != Eigen::Success) {
            out.singular = true;
            return out;
        }
        Eigen::VectorXd dx = lu.solve(-f);
        if (!dx.allFinite()) {
            out.singular = true;
            return out;
        }

        // Damping: halve the step (up to 8 times) while it increases the residual.
        Eigen::VectorXd x_new = x + dx;
        Eigen::VectorXd f_new(sys.dim);
        for (int halve = 0; halve < 8; ++halve) {
            sys.assemble(x_new, gmin, src_scale, trip, f_new);
            if (inf_norm(f_new) <= res) break;
            dx *= 0.5;
            x_new = x + dx;
        }
        last_step = inf_norm(dx);
        x = x_new;
    }
    // One final residual check at the last iterate.
    sys.assemble(x, gmin, src_scale, trip, f);
    const double res = inf_norm(f);
    out.residual = std::min(out.residual, res);
    out.iterations = opts.max_iter;
    out.converged = res <= opts.tol_res && last_step <= opts.tol_dv;
    return out;
}

// Newton with the convergence-aid ladder: plain solve, then gmin stepping
// (1e-3 down to 1e-12 by decades), then source stepping as a final fallback.
NewtonOutcome robust_solve(const MnaSystem& sys, Eigen::VectorXd& x, const SimOptions& opts) {
    Eigen::VectorXd x0 = x;
    NewtonOutcome out = newton_solve(sys, x, 0.0, 1.0, opts);
    if (out.converged || !opts.homotopy) return out;

    {
        Eigen::VectorXd xg = Eigen::VectorXd::Zero(sys.dim);
        bool ok = true;
        for (double gmin = 1e-3; gmin >= 1e-12; gmin /= 10.0) {
            const auto step = newton_solve(sys, xg, gmin, 1.0, opts);
            if (!step.converged) {
                ok = false;
                break;
            }
        }
        if (ok) {
            const auto fin = newton_solve(sys, xg, 0.0, 1.0, opts);
            if (fin.converged) {
                x = xg;
                return fin;
            }
        }
    }
    {
        Eigen::VectorXd xs = Eigen::VectorXd::Zero(sys.dim);
        bool ok = true;
        for (int s = 1; s <= 20; ++s) {
            const auto step = newton_solve(sys, xs, 0.0, s / 20.0, opts);
            if (!step.converged) {
                ok = false;
                break;
            }
        }
        if (ok) {
            x = xs;
            return newton_solve(sys, x, 0.0, 1.0, opts);
        }
    }
    x = x0;
    return out;
}

void check_structure(const Netlist& n, const MnaSystem& sys) {
    const auto floating = floating_nodes(n);
    if (!floating.empty()) {
        std::string msg = "singular system: no DC path to ground from node(s)";
        for (const auto& node : floating) msg += " " + node;
        throw SimulationError(SimErrorKind::SingularMatrix, msg, floating);
    }
    (void)sys;
}

OperatingPoint make_point(const MnaSystem& sys, const Eigen::VectorXd& x,
                          const NewtonOutcome& out) {
    OperatingPoint op;
    op.nodes = sys.nodes;
    for (const auto& e : sys.netlist.elements) op.elems.push_back(e.id);
    op.node_v.assign(x.data(), x.data() + sys.nv);
    op.elem_i = sys.element_currents(x);
    op.iterations = out.iterations;
    op.residual = out.residual;
    return op;
}

} // namespace

double OperatingPoint::voltage(const std::string& node) const {
    if (node == Netlist::kGround) return 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i] == node) return node_v[i];
    throw std::out_of_range("no such node: " + node);
}

double OperatingPoint::current(const std::string& elem) const {
    for (std::size_t i = 0; i < elems.size(); ++i)
        if (elems[i] == elem) return elem_i[i];
    throw std::out_of_range("no such element: " + elem);
}

bool SimTrace::fully_converged() const {
    return std::all_of(converged.begin(), converged.end(), [](bool b) { return b; });
}

std::optional<std::size_t> SimTrace::node_index(const std::string& node) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i] == node) return i;
    return std::nullopt;
}

void SimTrace::write_csv(std::ostream& os) const {
    os << "sweep";
    for (const auto& n : nodes) os << ',' << n;
    for (const auto& e : elems) os << ',' << e;
    os << '\n';
    for (int p = 0; p < points(); ++p) {
        os << format_value(sweep_values[p]);
        auto cell = [&](double v) {
            os << ',' << (std::isnan(v) ? std::string("nan") : format_value(v));
        };
        for (double v : node_v[p]) cell(v);
        for (double i : elem_i[p]) cell(i);
        os << '\n';
    }
}

std::string SimTrace::to_csv() const {
    std::ostringstream ss;
    write_csv(ss);
    return ss.str();
}

SimTrace trace_from_csv(std::istream& is, const Netlist& n, const std::string& source_id) {
    std::string header;
    if (!std::getline(is, header))
        throw std::runtime_error("trace csv: missing header row");

    std::vector<std::string> cols;
    {
        std::istringstream hs(header);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    if (cols.empty() || cols[0] != "sweep")
        throw std::runtime_error("trace csv: first column must be 'sweep'");

    const auto inv = node_inventory(n);
    std::vector<int> node_col(inv.size(), -1);
    std::vector<std::string> elem_ids;
    for (const auto& e : n.elements) elem_ids.push_back(e.id);
    std::vector<int> elem_col(elem_ids.size(), -1);
    for (std::size_t c = 1; c < cols.size(); ++c) {
        bool known = false;
        for (std::size_t i = 0; i < inv.size(); ++i)
            if (inv[i] == cols[c]) {
                node_col[i] = static_cast<int>(c);
                known = true;
            }
        for (std::size_t i = 0; i < elem_ids.size(); ++i)
            if (elem_ids[i] == cols[c]) {
                elem_col[i] = static_cast<int>(c);
                known = true;
            }
        if (!known)
            throw std::runtime_error("trace csv: column '" + cols[c] +
                                     "' matches no node or element of the netlist");
    }
    for (std::size_t i = 0; i < inv.size(); ++i)
        if (node_col[i] < 0)
            throw std::runtime_error("trace csv: missing column for node '" + inv[i] + "'");

    SimTrace t;
    t.nodes = inv;
    t.elems = elem_ids;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ','))
            row.push_back(cell == "nan" ? kNan : std::strtod(cell.c_str(), nullptr));
        if (row.size() != cols.size())
            throw std::runtime_error("trace csv: row width mismatch");
        t.sweep_values.push_back(row[0]);
        std::vector<double> nv(inv.size()), ei(elem_ids.size(), 0.0);
        bool ok = true;
        for (std::size_t i = 0; i < inv.size(); ++i) {
            nv[i] = row[static_cast<std::size_t>(node_col[i])];
            if (std::isnan(nv[i])) ok = false;
        }
        for (std::size_t i = 0; i < elem_ids.size(); ++i)
            if (elem_col[i] >= 0) ei[i] = row[static_cast<std::size_t>(elem_col[i])];
        t.node_v.push_back(std::move(nv));
        t.elem_i.push_back(std::move(ei));
        t.converged.push_back(ok);
    }
    t.sweep.source_id = source_id;
    if (!t.sweep_values.empty()) {
        t.sweep.start = t.sweep_values.front();
        t.sweep.stop = t.sweep_values.back();
        t.sweep.points = static_cast<int>(t.sweep_values.size());
    }
    return t;
}

std::vector<std::string> floating_nodes(const Netlist& n) {
    // Union-find over nodes; conducting edges only. Capacitors are opens,
    // current sources impose no potential, MOSFET gates are isolated.
    std::map<std::string, std::string> parent;
    std::function<std::string(const std::string&)> find = [&](const std::string& a) {
        auto it = parent.find(a);
        if (it == parent.end()) {
            parent[a] = a;
            return a;
        }
        if (it->second == a) return a;
        return parent[a] = find(it->second);
    };
    auto unite = [&](const std::string& a, const std::string& b) {
        parent[find(a)] = find(b);
    };

    (void)find(Netlist::kGround);
    for (const auto& e : n.elements) {
        for (const auto& node : e.nodes) (void)find(node);
        switch (e.kind) {
        case ElementKind::Resistor:
        case ElementKind::VoltageSource:
            unite(e.nodes[0], e.nodes[1]);
            break;
        case ElementKind::Nmos:
        case ElementKind::Pmos:
            unite(e.nodes[0], e.nodes[2]); // drain-source channel
            break;
        default:
            break;
        }
    }

    std::vector<std::string> out;
    const std::string groot = find(Netlist::kGround);
    for (const auto& node : node_inventory(n))
        if (find(node) != groot) out.push_back(node);
    return out;
}

OperatingPoint dc_operating_point(const Netlist& n,
                                  const std::map<std::string, double>& fixed_inputs,
                                  const SimOptions& opts) {
    for (const auto& [id, v] : fixed_inputs) {
        const Element* e = n.find(id);
        if (!e || (e->kind != ElementKind::VoltageSource && e->kind != ElementKind::CurrentSource))
            throw SimulationError(SimErrorKind::UnknownSource, "no such source: " + id);
        (void)v;
    }
    MnaSystem sys(n, opts, fixed_inputs);
    check_structure(n, sys);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.dim);
    const auto out = robust_solve(sys, x, opts);
    if (out.singular)
        throw SimulationError(SimErrorKind::SingularMatrix,
                              "singular MNA matrix during Newton iteration");
    if (!out.converged)
        throw SimulationError(SimErrorKind::NonConvergence,
                              "Newton failed to converge: best residual " +
                                  format_value(out.residual) + " A after " +
                                  std::to_string(out.iterations) + " iterations",
                              {}, out.iterations, out.residual);
    return make_point(sys, x, out);
}

SimTrace dc_sweep(const Netlist& n, const SweepSpec& spec, const SimOptions& opts) {
    if (spec.points < 2 || !(spec.start < spec.stop))
        throw SimulationError(SimErrorKind::BadSweep,
                              "sweep needs start < stop and points >= 2");
    const Element* src = n.find(spec.source_id);
    if (!src || src->kind != ElementKind::VoltageSource)
        throw SimulationError(SimErrorKind::UnknownSource,
                              "swept source '" + spec.source_id + "' is not a voltage source");

    MnaSystem sys(n, opts, {});
    check_structure(n, sys);

    SimTrace t;
    t.sweep = spec;
    t.nodes = sys.nodes;
    for (const auto& e : n.elements) t.elems.push_back(e.id);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.dim);
    bool have_warm = false;
    const double step = (spec.stop - spec.start) / (spec.points - 1);
    for (int p = 0; p < spec.points; ++p) {
        const double v = spec.start + p * step;
        sys.overrides[spec.source_id] = v;
        Eigen::VectorXd xp = (opts.warm_start && have_warm) ? x : Eigen::VectorXd::Zero(sys.dim);
        const auto out = robust_solve(sys, xp, opts);
        t.sweep_values.push_back(v);
        if (out.converged) {
            const auto op = make_point(sys, xp, out);
            t.node_v.push_back(op.node_v);
            t.elem_i.push_back(op.elem_i);
            t.converged.push_back(true);
            x = xp;
            have_warm = true;
        } else {
            t.node_v.emplace_back(sys.nodes.size(), kNan);
            t.elem_i.emplace_back(n.elements.size(), kNan);
            t.converged.push_back(false);
        }
    }
    return t;
}

} // namespace latent
