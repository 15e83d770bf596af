#include "latent/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "latent/spice_value.hpp"

namespace latent {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> toks;
    std::istringstream iss{std::string(line)};
    std::string t;
    while (iss >> t) toks.push_back(t);
    return toks;
}

std::string canonical_node(const std::string& raw) {
    const std::string l = lower(raw);
    if (l == "0" || l == "gnd") return Netlist::kGround;
    return raw;
}

bool is_ground(const std::string& node) { return node == Netlist::kGround; }

struct LogicalLine {
    std::string text;
    int line; // first physical line, 1-based
};

// Join "+" continuations onto their opening line.
std::vector<LogicalLine> logical_lines(std::string_view text) {
    std::vector<LogicalLine> out;
    int lineno = 0;
    std::istringstream iss{std::string(text)};
    std::string raw;
    while (std::getline(iss, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::size_t first = raw.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (raw[first] == '+' && !out.empty()) {
            out.back().text += " " + raw.substr(first + 1);
        } else {
            out.push_back({raw.substr(first), lineno});
        }
    }
    return out;
}

struct KeyValue {
    std::string key;
    double value;
};

std::optional<KeyValue> parse_key_value(const std::string& tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= tok.size()) return std::nullopt;
    auto v = parse_spice_number(std::string_view(tok).substr(eq + 1));
    if (!v) return std::nullopt;
    return KeyValue{lower(tok.substr(0, eq)), *v};
}

// Canonical param spelling: W/L uppercase, model params lowercase.
std::string element_param_key(const std::string& k) {
    if (k == "w") return "W";
    if (k == "l") return "L";
    return k;
}

void parse_model_card(const std::vector<std::string>& toks, int line, Netlist& out) {
    if (toks.size() < 3)
        throw ParseError(ParseErrorCode::BadModelCard, line, toks.empty() ? "" : toks[0],
                         "expected .model <name> <nmos|pmos> [k=v ...]");
    ModelCard card;
    card.name = toks[1];
    const std::string type = lower(toks[2]);
    if (type == "nmos") card.kind = ElementKind::Nmos;
    else if (type == "pmos") card.kind = ElementKind::Pmos;
    else
        throw ParseError(ParseErrorCode::BadModelCard, line, toks[2],
                         "unsupported model type '" + toks[2] + "'");
    for (std::size_t i = 3; i < toks.size(); ++i) {
        auto kv = parse_key_value(toks[i]);
        if (!kv)
            throw ParseError(ParseErrorCode::BadModelCard, line, toks[i],
                             "bad model parameter '" + toks[i] + "'");
        card.params[kv->key] = kv->value;
    }
    out.models[card.name] = card;
}

double require_positive(double v, const std::string& tok, int line, const char* what) {
    if (!std::isfinite(v) || v <= 0.0)
        throw ParseError(ParseErrorCode::MalformedValue, line, tok,
                         std::string(what) + " must be finite and > 0");
    return v;
}

Element parse_element(const std::vector<std::string>& toks, int line, const Netlist& models) {
    Element e;
    e.id = toks[0];
    const char prefix = static_cast<char>(std::toupper(static_cast<unsigned char>(toks[0][0])));

    auto node = [&](std::size_t i) { return canonical_node(toks[i]); };
    auto value_token = [&](std::size_t i) -> double {
        auto v = parse_spice_number(toks[i]);
        if (!v)
            throw ParseError(ParseErrorCode::MalformedValue, line, toks[i],
                             "cannot parse numeric value '" + toks[i] + "'");
        return *v;
    };

    switch (prefix) {
    case 'R':
    case 'C': {
        if (toks.size() != 4)
            throw ParseError(ParseErrorCode::ArityMismatch, line, toks[0],
                             std::string(prefix == 'R' ? "resistor" : "capacitor") +
                                 " expects <id> <n1> <n2> <value>");
        e.kind = prefix == 'R' ? ElementKind::Resistor : ElementKind::Capacitor;
        e.nodes = {node(1), node(2)};
        const double v = value_token(3);
        e.params[prefix == 'R' ? "R" : "C"] =
            require_positive(v, toks[3], line, prefix == 'R' ? "resistance" : "capacitance");
        break;
    }
    case 'V':
    case 'I': {
        // Optional DC keyword: "V1 a b DC 2" or "V1 a b 2".
        std::size_t vi = 3;
        if (toks.size() == 5 && lower(toks[3]) == "dc") vi = 4;
        else if (toks.size() != 4)
            throw ParseError(ParseErrorCode::ArityMismatch, line, toks[0],
                             "source expects <id> <n+> <n-> [DC] <value>");
        e.kind = prefix == 'V' ? ElementKind::VoltageSource : ElementKind::CurrentSource;
        e.nodes = {node(1), node(2)};
        e.params["DC"] = value_token(vi);
        break;
    }
    case 'M': {
        if (toks.size() < 5)
            throw ParseError(ParseErrorCode::ArityMismatch, line, toks[0],
                             "mosfet expects <id> <d> <g> <s> <model> [W=..] [L=..]");
        e.nodes = {node(1), node(2), node(3)};
        e.model = toks[4];
        auto it = models.models.find(e.model);
        if (it == models.models.end())
            throw ParseError(ParseErrorCode::UnknownModel, line, toks[4],
                             "no .model card named '" + toks[4] + "'");
        e.kind = it->second.kind;
        for (const auto& [k, v] : it->second.params) {
            if (k == "vto") e.params["Vto"] = v;
            else if (k == "kp") e.params["Kp"] = v;
        }
        for (std::size_t i = 5; i < toks.size(); ++i) {
            auto kv = parse_key_value(toks[i]);
            if (!kv)
                throw ParseError(ParseErrorCode::MalformedValue, line, toks[i],
                                 "bad mosfet parameter '" + toks[i] + "'");
            const std::string key = element_param_key(kv->key);
            if (key == "W" || key == "L")
                e.params[key] = require_positive(kv->value, toks[i], line,
                                                 key == "W" ? "width" : "length");
            else
                e.params[key] = kv->value;
        }
        break;
    }
    default:
        throw ParseError(ParseErrorCode::UnknownElementPrefix, line, toks[0],
                         std::string("unknown element prefix '") + toks[0][0] + "'");
    }
    return e;
}

} // namespace

std::string_view kind_name(ElementKind k) {
    switch (k) {
    case ElementKind::Resistor: return "R";
    case ElementKind::Capacitor: return "C";
    case ElementKind::Nmos: return "NMOS";
    case ElementKind::Pmos: return "PMOS";
    case ElementKind::VoltageSource: return "VSRC";
    case ElementKind::CurrentSource: return "ISRC";
    }
    return "?";
}

char kind_prefix(ElementKind k) {
    switch (k) {
    case ElementKind::Resistor: return 'R';
    case ElementKind::Capacitor: return 'C';
    case ElementKind::Nmos:
    case ElementKind::Pmos: return 'M';
    case ElementKind::VoltageSource: return 'V';
    case ElementKind::CurrentSource: return 'I';
    }
    return '?';
}

std::string_view check_code_name(CheckCode c) {
    switch (c) {
    case CheckCode::Ok: return "Ok";
    case CheckCode::BadIdentifierPrefix: return "BadIdentifierPrefix";
    case CheckCode::BadIdentifierSuffix: return "BadIdentifierSuffix";
    case CheckCode::DuplicateId: return "DuplicateId";
    case CheckCode::ArityMismatch: return "ArityMismatch";
    case CheckCode::UnknownNode: return "UnknownNode";
    case CheckCode::BadValue: return "BadValue";
    case CheckCode::MissingModel: return "MissingModel";
    }
    return "?";
}

ParseError::ParseError(ParseErrorCode code, int line, std::string token, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what),
      code(code), line(line), token(std::move(token)) {}

const Element* Netlist::find(const std::string& id) const {
    for (const auto& e : elements)
        if (e.id == id) return &e;
    return nullptr;
}

bool Netlist::has_node(const std::string& node) const {
    if (is_ground(node)) return true;
    for (const auto& e : elements)
        for (const auto& n : e.nodes)
            if (n == node) return true;
    return false;
}

Netlist parse(std::string_view text, std::string source_name) {
    Netlist out;
    out.meta.source_name = std::move(source_name);
    const auto lines = logical_lines(text);

    // Model cards first so element lines may reference cards defined below them.
    for (const auto& ll : lines) {
        if (ll.text[0] != '.') continue;
        auto toks = split_ws(ll.text);
        if (lower(toks[0]) == ".model") parse_model_card(toks, ll.line, out);
    }

    std::set<std::string> seen_ids;
    for (const auto& ll : lines) {
        const char c = ll.text[0];
        if (c == '*') {
            std::string body = ll.text.substr(1);
            const auto start = body.find_first_not_of(" \t");
            body = start == std::string::npos ? "" : body.substr(start);
            if (out.title.empty() && out.meta.comments.empty() && !body.empty()) out.title = body;
            out.meta.comments.push_back(ll.text);
            continue;
        }
        if (c == '.') {
            const auto toks = split_ws(ll.text);
            const std::string card = lower(toks[0]);
            if (card == ".model") continue; // handled above
            out.meta.control_cards.push_back(ll.text);
            if (card == ".dc" || card == ".op")
                out.meta.warnings.push_back("line " + std::to_string(ll.line) + ": embedded '" +
                                            card + "' card ignored; sweeps are configured by the caller");
            continue;
        }
        const auto toks = split_ws(ll.text);
        Element e = parse_element(toks, ll.line, out);
        if (!seen_ids.insert(e.id).second)
            throw ParseError(ParseErrorCode::DuplicateId, ll.line, e.id,
                             "duplicate element id '" + e.id + "'");
        out.elements.push_back(std::move(e));
    }
    return out;
}

Netlist parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open netlist file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

std::string serialize(const Netlist& n) {
    std::ostringstream out;
    if (!n.title.empty()) out << "* " << n.title << "\n";
    for (const auto& e : n.elements) {
        out << e.id;
        for (const auto& node : e.nodes) out << ' ' << node;
        switch (e.kind) {
        case ElementKind::Resistor: out << ' ' << format_value(e.param_or("R", 0.0)); break;
        case ElementKind::Capacitor: out << ' ' << format_value(e.param_or("C", 0.0)); break;
        case ElementKind::VoltageSource:
        case ElementKind::CurrentSource:
            out << " DC " << format_value(e.param_or("DC", 0.0));
            break;
        case ElementKind::Nmos:
        case ElementKind::Pmos:
            out << ' ' << e.model;
            if (e.has_param("W")) out << " W=" << format_value(e.params.at("W"));
            if (e.has_param("L")) out << " L=" << format_value(e.params.at("L"));
            break;
        }
        out << '\n';
    }
    for (const auto& [name, card] : n.models) {
        out << ".model " << name << ' '
            << (card.kind == ElementKind::Nmos ? "nmos" : "pmos");
        // vto/kp first, extras after, stable order
        for (const char* key : {"vto", "kp"})
            if (card.params.count(key)) out << ' ' << key << '=' << format_value(card.params.at(key));
        for (const auto& [k, v] : card.params)
            if (k != "vto" && k != "kp") out << ' ' << k << '=' << format_value(v);
        out << '\n';
    }
    if (!n.elements.empty() || !n.models.empty()) out << ".end\n";
    return out.str();
}

CheckResult syntax_check(const Element& candidate, const Netlist& n) {
    // (a) identifier convention: kind prefix letter + positive integer suffix
    if (candidate.id.empty() ||
        std::toupper(static_cast<unsigned char>(candidate.id[0])) != kind_prefix(candidate.kind))
        return CheckResult::reject(CheckCode::BadIdentifierPrefix,
                                   "id '" + candidate.id + "' does not start with '" +
                                       std::string(1, kind_prefix(candidate.kind)) + "'");
    const std::string suffix = candidate.id.substr(1);
    const bool digits = !suffix.empty() &&
                        std::all_of(suffix.begin(), suffix.end(),
                                    [](unsigned char ch) { return std::isdigit(ch); });
    if (!digits || suffix.find_first_not_of('0') == std::string::npos)
        return CheckResult::reject(CheckCode::BadIdentifierSuffix,
                                   "id '" + candidate.id +
                                       "' must end in a positive integer (e.g. \"M93\", not \"Mx\")");
    if (n.find(candidate.id))
        return CheckResult::reject(CheckCode::DuplicateId,
                                   "id '" + candidate.id + "' already present");

    // (b) arity and value constraints
    const bool mos = candidate.kind == ElementKind::Nmos || candidate.kind == ElementKind::Pmos;
    const std::size_t arity = mos ? 3 : 2;
    if (candidate.nodes.size() != arity)
        return CheckResult::reject(CheckCode::ArityMismatch,
                                   std::string(kind_name(candidate.kind)) + " expects " +
                                       std::to_string(arity) + " nodes, got " +
                                       std::to_string(candidate.nodes.size()));
    for (const auto& [key, v] : candidate.params)
        if (!std::isfinite(v))
            return CheckResult::reject(CheckCode::BadValue, "parameter " + key + " is not finite");
    switch (candidate.kind) {
    case ElementKind::Resistor:
        if (candidate.param_or("R", 0.0) <= 0.0)
            return CheckResult::reject(CheckCode::BadValue, "resistance must be > 0");
        break;
    case ElementKind::Capacitor:
        if (candidate.param_or("C", 0.0) <= 0.0)
            return CheckResult::reject(CheckCode::BadValue, "capacitance must be > 0");
        break;
    case ElementKind::Nmos:
    case ElementKind::Pmos: {
        if (candidate.has_param("W") && candidate.params.at("W") <= 0.0)
            return CheckResult::reject(CheckCode::BadValue, "W must be > 0");
        if (candidate.has_param("L") && candidate.params.at("L") <= 0.0)
            return CheckResult::reject(CheckCode::BadValue, "L must be > 0");
        const bool model_known = !candidate.model.empty() &&
                                 (n.models.count(candidate.model) ||
                                  (candidate.has_param("Vto") && candidate.has_param("Kp")));
        if (!model_known)
            return CheckResult::reject(CheckCode::MissingModel,
                                       "mosfet needs a model card or Vto/Kp parameters");
        break;
    }
    default:
        break;
    }

    // (c) every referenced node must already exist in the circuit
    for (const auto& node : candidate.nodes)
        if (!n.has_node(node))
            return CheckResult::reject(CheckCode::UnknownNode,
                                       "node '" + node + "' is not in the circuit inventory");
    return CheckResult::ok();
}

Netlist insert(const Netlist& n, Element e, std::size_t position) {
    Netlist out = n;
    if (position > out.elements.size()) position = out.elements.size();
    const bool mos = e.kind == ElementKind::Nmos || e.kind == ElementKind::Pmos;
    if (mos && !e.model.empty() && !out.models.count(e.model)) {
        ModelCard card;
        card.name = e.model;
        card.kind = e.kind;
        if (e.has_param("Vto")) card.params["vto"] = e.params.at("Vto");
        if (e.has_param("Kp")) card.params["kp"] = e.params.at("Kp");
        out.models[card.name] = card;
        out.meta.auto_models.insert(e.model);
    }
    out.elements.insert(out.elements.begin() + static_cast<std::ptrdiff_t>(position), std::move(e));
    return out;
}

std::size_t sample_insert_position(Rng& rng, std::size_t element_count) {
    return static_cast<std::size_t>(rng.bounded(element_count + 1));
}

Netlist remove(const Netlist& n, const std::string& id) {
    Netlist out = n;
    auto it = std::find_if(out.elements.begin(), out.elements.end(),
                           [&](const Element& e) { return e.id == id; });
    if (it == out.elements.end()) throw IdNotFoundError(id);
    const std::string model = it->model;
    out.elements.erase(it);
    if (!model.empty() && out.meta.auto_models.count(model)) {
        const bool referenced = std::any_of(out.elements.begin(), out.elements.end(),
                                            [&](const Element& e) { return e.model == model; });
        if (!referenced) {
            out.models.erase(model);
            out.meta.auto_models.erase(model);
        }
    }
    return out;
}

std::vector<std::string> node_inventory(const Netlist& n) {
    std::vector<std::string> inv;
    std::set<std::string> seen;
    for (const auto& e : n.elements)
        for (const auto& node : e.nodes) {
            if (is_ground(node)) continue;
            if (seen.insert(node).second) inv.push_back(node);
        }
    return inv;
}

} // namespace latent
