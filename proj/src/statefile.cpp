#include "bohmflow/statefile.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bohmflow/errors.hpp"

namespace bohmflow {

namespace {

double parse_real(const std::string& tok, const std::string& what) {
    double v = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw ConfigError("state file: bad " + what + " literal '" + tok + "'");
    return v;
}

int parse_int(const std::string& tok, const std::string& what) {
    int v = 0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw ConfigError("state file: bad " + what + " literal '" + tok + "'");
    return v;
}

std::string shortest_literal(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    // prefer the shortest representation that still round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof probe, "%.*g", prec, x);
        double back = 0.0;
        std::from_chars(probe, probe + std::char_traits<char>::length(probe), back);
        if (back == x) return probe;
    }
    return buf;
}

}  // namespace

StateSpec StateSpec::parse(const std::string& text) {
    StateSpec spec;
    bool saw_hbar = false, saw_masses = false, saw_omegas = false;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        std::vector<std::string> toks;
        for (std::string t; ls >> t;) toks.push_back(t);
        auto want = [&](size_t n) {
            if (toks.size() != n)
                throw ConfigError("state file line " + std::to_string(lineno) + ": '" + key + "' expects " +
                                  std::to_string(n) + " values");
        };
        if (key == "hbar") {
            if (saw_hbar) throw ConfigError("state file: duplicate 'hbar'");
            want(1);
            spec.hbar = toks[0];
            saw_hbar = true;
        } else if (key == "masses") {
            if (saw_masses) throw ConfigError("state file: duplicate 'masses'");
            want(3);
            spec.masses = {toks[0], toks[1], toks[2]};
            saw_masses = true;
        } else if (key == "omegas") {
            if (saw_omegas) throw ConfigError("state file: duplicate 'omegas'");
            want(3);
            spec.omegas = {toks[0], toks[1], toks[2]};
            saw_omegas = true;
        } else if (key == "term") {
            want(5);
            spec.terms.push_back({{toks[0], toks[1], toks[2]}, toks[3], toks[4]});
        } else {
            throw ConfigError("state file line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (!saw_hbar || !saw_masses || !saw_omegas)
        throw ConfigError("state file: 'hbar', 'masses' and 'omegas' are all required");
    if (spec.terms.empty()) throw ConfigError("state file: at least one 'term' row is required");
    return spec;
}

StateSpec StateSpec::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open state file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string StateSpec::serialize() const {
    std::ostringstream out;
    out << "hbar " << hbar << "\n";
    out << "masses " << masses[0] << " " << masses[1] << " " << masses[2] << "\n";
    out << "omegas " << omegas[0] << " " << omegas[1] << " " << omegas[2] << "\n";
    for (const auto& t : terms)
        out << "term " << t.n[0] << " " << t.n[1] << " " << t.n[2] << " " << t.re << " " << t.im << "\n";
    return out.str();
}

Superposition StateSpec::build() const {
    OscillatorConfig cfg;
    cfg.hbar = parse_real(hbar, "hbar");
    for (int k = 0; k < 3; ++k) {
        cfg.mass[k] = parse_real(masses[k], "mass");
        cfg.omega[k] = parse_real(omegas[k], "omega");
    }
    std::vector<std::pair<Complex, Mode>> rows;
    for (const auto& t : terms) {
        Mode m{parse_int(t.n[0], "quantum number"), parse_int(t.n[1], "quantum number"),
               parse_int(t.n[2], "quantum number")};
        rows.emplace_back(Complex{parse_real(t.re, "coefficient"), parse_real(t.im, "coefficient")}, m);
    }
    return Superposition(cfg, std::move(rows));
}

StateSpec StateSpec::describe(const Superposition& state) {
    StateSpec spec;
    const auto& cfg = state.config();
    spec.hbar = shortest_literal(cfg.hbar);
    for (int k = 0; k < 3; ++k) {
        spec.masses[k] = shortest_literal(cfg.mass[k]);
        spec.omegas[k] = shortest_literal(cfg.omega[k]);
    }
    for (const auto& t : state.terms()) {
        TermRow row;
        for (int k = 0; k < 3; ++k) row.n[k] = std::to_string(t.mode[k]);
        row.re = shortest_literal(t.coefficient.real());
        row.im = shortest_literal(t.coefficient.imag());
        spec.terms.push_back(row);
    }
    return spec;
}

bool StateSpec::operator==(const StateSpec& o) const {
    if (hbar != o.hbar || masses != o.masses || omegas != o.omegas || terms.size() != o.terms.size())
        return false;
    for (size_t i = 0; i < terms.size(); ++i)
        if (terms[i].n != o.terms[i].n || terms[i].re != o.terms[i].re || terms[i].im != o.terms[i].im)
            return false;
    return true;
}

}  // namespace bohmflow
