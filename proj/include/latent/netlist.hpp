#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "latent/rng.hpp"

namespace latent {

enum class ElementKind {
    Resistor,
    Capacitor,
    Nmos,
    Pmos,
    VoltageSource,
    CurrentSource,
};

std::string_view kind_name(ElementKind k);
char kind_prefix(ElementKind k); // R, C, M, M, V, I

// One netlist line. Passives and sources name 2 nodes; MOSFETs name 3
// (drain, gate, source; bulk is tied to source in this 3-terminal model).
// params hold SI values: R, C, DC, W, L plus Vto/Kp resolved from the
// element's .model card at parse time.
struct Element {
    ElementKind kind{};
    std::string id;
    std::vector<std::string> nodes;
    std::map<std::string, double> params;
    std::string model; // MOSFET model card name, empty otherwise

    bool operator==(const Element&) const = default;

    double param_or(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
    bool has_param(const std::string& key) const { return params.count(key) != 0; }
};

struct ModelCard {
    std::string name;
    ElementKind kind{}; // Nmos or Pmos
    std::map<std::string, double> params; // vto, kp, plus any extras retained

    bool operator==(const ModelCard&) const = default;
};

// Source-file provenance. Never part of structural equality.
struct NetlistMeta {
    std::string source_name;
    std::vector<std::string> comments;
    std::vector<std::string> control_cards;
    std::vector<std::string> warnings;
    // Model cards added by insert() rather than parsed from the source;
    // remove() drops them again once orphaned so insert/remove stays an
    // exact inverse.
    std::set<std::string> auto_models;
};

struct Netlist {
    static constexpr const char* kGround = "0";

    std::string title;
    std::vector<Element> elements;
    std::map<std::string, ModelCard> models;
    NetlistMeta meta;

    const Element* find(const std::string& id) const;
    bool has_node(const std::string& node) const;

    // Structural equality: title, element sequence and model cards.
    bool operator==(const Netlist& o) const {
        return title == o.title && elements == o.elements && models == o.models;
    }
};

enum class ParseErrorCode {
    UnknownElementPrefix,
    ArityMismatch,
    MalformedValue,
    DuplicateId,
    BadModelCard,
    UnknownModel,
};

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorCode code, int line, std::string token, const std::string& what);

    ParseErrorCode code;
    int line;          // 1-based line of the offending logical line
    std::string token; // offending token
};

class IdNotFoundError : public std::runtime_error {
public:
    explicit IdNotFoundError(const std::string& id)
        : std::runtime_error("element id not found: " + id), id(id) {}
    std::string id;
};

// Machine-readable verdict of syntax_check. Rejection is a value, not a
// failure; the reason text is fed back to the proposing policy verbatim.
enum class CheckCode {
    Ok,
    BadIdentifierPrefix,
    BadIdentifierSuffix,
    DuplicateId,
    ArityMismatch,
    UnknownNode,
    BadValue,
    MissingModel,
};

struct CheckResult {
    bool accepted = true;
    CheckCode code = CheckCode::Ok;
    std::string detail;

    static CheckResult ok() { return {true, CheckCode::Ok, ""}; }
    static CheckResult reject(CheckCode c, std::string detail) {
        return {false, c, std::move(detail)};
    }
    bool operator==(const CheckResult&) const = default;
};

std::string_view check_code_name(CheckCode c);

// --- operations -------------------------------------------------------

// Parse SPICE-dialect text. Continuation lines are joined, comments and
// control cards are retained as metadata, .model cards are resolved into
// MOSFET element params, unit suffixes are normalised to SI.
Netlist parse(std::string_view text, std::string source_name = "");
Netlist parse_file(const std::string& path);

// Canonical text: one element per line in order, then .model cards.
// parse(serialize(n)) is structurally equal to n.
std::string serialize(const Netlist& n);

// Validate a proposed element against the current candidate netlist.
CheckResult syntax_check(const Element& candidate, const Netlist& n);

// Insert at an explicit position in [0, elements.size()]; positions come
// from sample_insert_position so campaign placement is seeded and
// non-contiguous. Adds the element's model card when the netlist lacks it.
Netlist insert(const Netlist& n, Element e, std::size_t position);
std::size_t sample_insert_position(Rng& rng, std::size_t element_count);

// Remove exactly one element by id. Throws IdNotFoundError.
Netlist remove(const Netlist& n, const std::string& id);

// Node names in first-appearance order, ground excluded. N = result.size().
std::vector<std::string> node_inventory(const Netlist& n);

} // namespace latent
