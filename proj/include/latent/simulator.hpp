#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "latent/netlist.hpp"

namespace latent {

// DC input sweep over one voltage source, uniform grid. The grid is the
// "total input space" that activation-range scoring divides by.
struct SweepSpec {
    std::string source_id;
    double start = 0.0;
    double stop = 2.0;
    int points = 26;

    bool operator==(const SweepSpec&) const = default;
};

struct SimOptions {
    double tol_res = 1e-9;    // Newton residual bound on KCL currents (A)
    double tol_dv = 1e-6;     // Newton step bound on voltage deltas (V)
    int max_iter = 200;       // per operating point
    double cap_gmin = 1e-12;  // capacitors stamp as this conductance at DC
    double mosfet_goff = 1e-12;
    bool warm_start = true;   // sweep points reuse the previous solution
    bool homotopy = true;     // gmin + source stepping fallbacks
};

enum class SimErrorKind { NonConvergence, SingularMatrix, UnknownSource, BadSweep };

class SimulationError : public std::runtime_error {
public:
    SimulationError(SimErrorKind kind, const std::string& what,
                    std::vector<std::string> nodes = {}, int iterations = 0,
                    double best_residual = 0.0)
        : std::runtime_error(what), kind(kind), nodes(std::move(nodes)),
          iterations(iterations), best_residual(best_residual) {}

    SimErrorKind kind;
    std::vector<std::string> nodes; // offending nodes for SingularMatrix
    int iterations;
    double best_residual;
};

struct OperatingPoint {
    std::vector<std::string> nodes; // inventory order
    std::vector<std::string> elems; // netlist order
    std::vector<double> node_v;
    std::vector<double> elem_i;
    int iterations = 0;
    double residual = 0.0;

    double voltage(const std::string& node) const;
    double current(const std::string& elem) const;
};

// Per-point node voltages and element currents for a whole sweep. Ground is
// not a column; it is identically 0 V. Unconverged points carry NaN values
// and converged=false, the sweep itself never aborts on them.
struct SimTrace {
    SweepSpec sweep;
    std::vector<std::string> nodes;
    std::vector<std::string> elems;
    std::vector<double> sweep_values;
    std::vector<std::vector<double>> node_v; // [point][node]
    std::vector<std::vector<double>> elem_i; // [point][elem]
    std::vector<bool> converged;

    int points() const { return static_cast<int>(sweep_values.size()); }
    bool fully_converged() const;
    std::optional<std::size_t> node_index(const std::string& node) const;
    double voltage(std::size_t point, std::size_t node) const { return node_v[point][node]; }

    // CSV header "sweep,<node...>,<element...>", one row per grid point,
    // NaN cells on unconverged rows.
    void write_csv(std::ostream& os) const;
    std::string to_csv() const;
};

// Rebuild a trace from its CSV form. Columns are classified against the
// netlist (node inventory vs element ids); rows containing NaN are marked
// unconverged.
SimTrace trace_from_csv(std::istream& is, const Netlist& n, const std::string& source_id);

// Newton-Raphson solve of the MNA equations at fixed source values.
// fixed_inputs overrides the DC value of named sources for this solve.
OperatingPoint dc_operating_point(const Netlist& n,
                                  const std::map<std::string, double>& fixed_inputs = {},
                                  const SimOptions& opts = {});

// Sweep the named source over the grid, warm-starting each point from the
// previous solution. Per-point non-convergence becomes a flagged row.
SimTrace dc_sweep(const Netlist& n, const SweepSpec& spec, const SimOptions& opts = {});

// Nodes with no conducting DC path to ground (conduction = resistors,
// voltage sources, MOSFET channels). Empty means structurally solvable.
std::vector<std::string> floating_nodes(const Netlist& n);

} // namespace latent
