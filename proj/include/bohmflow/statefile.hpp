#pragma once

#include <array>
#include <string>
#include <vector>

#include "bohmflow/oscillator.hpp"

namespace bohmflow {

/// Plain-text description of a superposition: masses, frequencies, hbar and
/// one `term` row per eigenmode. Decimal literals are kept verbatim so that
/// parse -> serialize round-trips the text exactly.
///
///   # comment
///   hbar 1
///   masses 1 1 1
///   omegas 1 1.4142135623730951 1.7320508075688772
///   term 1 0 0 0.5773502691896258 0
struct StateSpec {
    std::string hbar;
    std::array<std::string, 3> masses;
    std::array<std::string, 3> omegas;
    struct TermRow {
        std::array<std::string, 3> n;
        std::string re, im;
    };
    std::vector<TermRow> terms;

    static StateSpec parse(const std::string& text);
    static StateSpec parse_file(const std::string& path);
    std::string serialize() const;

    /// Converts the literals and constructs the (validated) superposition.
    Superposition build() const;

    /// Formats an existing state with shortest round-trip decimal literals.
    static StateSpec describe(const Superposition& state);

    bool operator==(const StateSpec&) const;
};

}  // namespace bohmflow
