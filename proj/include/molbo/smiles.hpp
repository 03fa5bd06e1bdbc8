#ifndef MOLBO_SMILES_HPP
#define MOLBO_SMILES_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "molbo/error.hpp"

namespace molbo {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct AtomRecord {
    std::string element;
    bool aromatic = false;
    int formal_charge = 0;
    /// Bracket H count, or the implicit count from the valence rule for
    /// organic-subset atoms. Hydrogens are never materialized as atoms.
    int explicit_h = 0;
    /// Heavy-atom neighbor count; filled in by MolGraph.
    int degree = 0;

    bool operator==(const AtomRecord&) const = default;
};

struct BondRecord {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    BondOrder order = BondOrder::Single;

    bool operator==(const BondRecord&) const = default;
};

struct Neighbor {
    std::uint32_t atom;
    BondOrder order;
};

/// Immutable simple graph of heavy atoms. Construction validates that bonds
/// reference valid atoms, contain no self-loops and no parallel edges.
class MolGraph {
public:
    MolGraph() = default;

    MolGraph(std::vector<AtomRecord> atoms, std::vector<BondRecord> bonds)
        : atoms_(std::move(atoms)), bonds_(std::move(bonds)), adjacency_(atoms_.size()) {
        const auto n = static_cast<std::uint32_t>(atoms_.size());
        for (const auto& bond : bonds_) {
            if (bond.a >= n || bond.b >= n) {
                throw Error(Errc::IndexOutOfRange, "bond references a missing atom");
            }
            if (bond.a == bond.b) {
                throw Error(Errc::UnmatchedRingClosure, "bond closes on its own atom");
            }
            for (const auto& nb : adjacency_[bond.a]) {
                if (nb.atom == bond.b) {
                    throw Error(Errc::UnmatchedRingClosure, "bond duplicates an existing bond");
                }
            }
            adjacency_[bond.a].push_back({bond.b, bond.order});
            adjacency_[bond.b].push_back({bond.a, bond.order});
        }
        for (std::uint32_t i = 0; i < n; ++i) {
            atoms_[i].degree = static_cast<int>(adjacency_[i].size());
        }
        n_components_ = count_components();
    }

    std::span<const AtomRecord> atoms() const noexcept { return atoms_; }
    std::span<const BondRecord> bonds() const noexcept { return bonds_; }
    std::span<const Neighbor> neighbors(std::size_t atom) const { return adjacency_[atom]; }
    std::size_t atom_count() const noexcept { return atoms_.size(); }
    std::size_t bond_count() const noexcept { return bonds_.size(); }
    int n_components() const noexcept { return n_components_; }

    /// Per-atom flag: atom has at least one incident bond lying on a cycle
    /// (i.e. an incident non-bridge edge).
    std::vector<bool> ring_atoms() const {
        const std::size_t n = atoms_.size();
        std::vector<bool> in_ring(n, false);
        std::vector<int> disc(n, -1), low(n, 0);
        int timer = 0;
        struct Frame {
            std::uint32_t atom;
            std::int64_t parent;
            std::size_t next;
        };
        std::vector<Frame> stack;
        for (std::uint32_t root = 0; root < n; ++root) {
            if (disc[root] != -1) continue;
            disc[root] = low[root] = timer++;
            stack.push_back({root, -1, 0});
            while (!stack.empty()) {
                Frame& f = stack.back();
                if (f.next < adjacency_[f.atom].size()) {
                    const std::uint32_t to = adjacency_[f.atom][f.next++].atom;
                    if (static_cast<std::int64_t>(to) == f.parent) continue;
                    if (disc[to] == -1) {
                        disc[to] = low[to] = timer++;
                        stack.push_back({to, static_cast<std::int64_t>(f.atom), 0});
                    } else {
                        low[f.atom] = std::min(low[f.atom], disc[to]);
                        // back edge: both endpoints lie on a cycle
                        in_ring[f.atom] = in_ring[to] = true;
                    }
                } else {
                    const Frame done = f;
                    stack.pop_back();
                    if (done.parent >= 0) {
                        const auto parent = static_cast<std::uint32_t>(done.parent);
                        low[parent] = std::min(low[parent], low[done.atom]);
                        if (low[done.atom] <= disc[parent]) {
                            // tree edge parent-child is not a bridge
                            in_ring[parent] = in_ring[done.atom] = true;
                        }
                    }
                }
            }
        }
        return in_ring;
    }

    /// Structural equality: same atoms in the same order and the same bond set.
    bool same_structure(const MolGraph& other) const {
        if (atoms_ != other.atoms_ || bonds_.size() != other.bonds_.size()) return false;
        auto canon = [](const MolGraph& g) {
            std::vector<std::array<std::uint32_t, 3>> v;
            for (const auto& b : g.bonds_) {
                v.push_back({std::min(b.a, b.b), std::max(b.a, b.b), static_cast<std::uint32_t>(b.order)});
            }
            std::sort(v.begin(), v.end());
            return v;
        };
        return canon(*this) == canon(other);
    }

private:
    int count_components() const {
        std::vector<std::uint32_t> parent(atoms_.size());
        std::iota(parent.begin(), parent.end(), 0u);
        auto find = [&](std::uint32_t x) {
            while (parent[x] != x) {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            return x;
        };
        int components = static_cast<int>(atoms_.size());
        for (const auto& bond : bonds_) {
            const auto ra = find(bond.a);
            const auto rb = find(bond.b);
            if (ra != rb) {
                parent[ra] = rb;
                --components;
            }
        }
        return components;
    }

    std::vector<AtomRecord> atoms_;
    std::vector<BondRecord> bonds_;
    std::vector<std::vector<Neighbor>> adjacency_;
    int n_components_ = 0;
};

namespace detail {

inline bool is_element_symbol(std::string_view sym) {
    static constexpr std::array<std::string_view, 118> kElements = {
        "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
        "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
        "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
        "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
        "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
        "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
        "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
        "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};
    return std::find(kElements.begin(), kElements.end(), sym) != kElements.end();
}

// Default valences of the organic subset, smallest first.
inline std::span<const int> organic_valences(std::string_view element) {
    static constexpr int kB[] = {3}, kC[] = {4}, kN[] = {3, 5}, kO[] = {2}, kP[] = {3, 5},
                         kS[] = {2, 4, 6}, kHal[] = {1};
    if (element == "B") return kB;
    if (element == "C") return kC;
    if (element == "N") return kN;
    if (element == "O") return kO;
    if (element == "P") return kP;
    if (element == "S") return kS;
    return kHal;
}

inline int bond_valence(BondOrder order) {
    switch (order) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
    }
    return 1;
}

class SmilesParser {
public:
    explicit SmilesParser(std::string_view s) : s_(s) {}

    MolGraph run() {
        if (s_.empty()) fail(Errc::UnknownSymbol, "empty SMILES");
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if (static_cast<unsigned char>(c) > 127 || c <= ' ') {
                fail(Errc::UnknownSymbol, "unexpected byte");
            }
            if (c == '[') {
                add_atom(parse_bracket_atom());
            } else if (std::isalpha(static_cast<unsigned char>(c))) {
                add_atom(parse_organic_atom());
            } else if (c == '(') {
                if (!prev_) fail(Errc::UnbalancedParenthesis, "branch opened without a preceding atom");
                if (pending_) fail(Errc::UnknownSymbol, "bond symbol before '('");
                branches_.push_back({*prev_, atoms_.size()});
                ++pos_;
            } else if (c == ')') {
                if (branches_.empty()) fail(Errc::UnbalancedParenthesis, "')' without matching '('");
                if (pending_) fail(Errc::UnknownSymbol, "bond symbol before ')'");
                if (branches_.back().second == atoms_.size()) fail(Errc::UnknownSymbol, "empty branch");
                prev_ = branches_.back().first;
                branches_.pop_back();
                ++pos_;
            } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
                if (!prev_ || pending_) fail(Errc::UnknownSymbol, "misplaced bond symbol");
                pending_ = c == '=' ? BondOrder::Double
                         : c == '#' ? BondOrder::Triple
                         : c == ':' ? BondOrder::Aromatic
                                    : BondOrder::Single;
                ++pos_;
            } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
                ring_closure();
            } else if (c == '.') {
                if (!prev_ || pending_) fail(Errc::UnknownSymbol, "misplaced '.'");
                prev_.reset();
                ++pos_;
            } else {
                fail(Errc::UnknownSymbol, std::string("unsupported character '") + c + "'");
            }
        }
        if (pending_) fail(Errc::UnknownSymbol, "dangling bond at end of input");
        if (!branches_.empty()) fail(Errc::UnbalancedParenthesis, "unclosed '('");
        if (!rings_.empty()) {
            fail(Errc::UnmatchedRingClosure, "ring bond " + std::to_string(rings_.begin()->first) + " never closed");
        }
        if (!prev_) fail(Errc::UnknownSymbol, "input ends with '.'");

        assign_implicit_hydrogens();
        std::vector<AtomRecord> atoms;
        atoms.reserve(atoms_.size());
        for (auto& a : atoms_) atoms.push_back(std::move(a.record));
        return MolGraph(std::move(atoms), std::move(bonds_));
    }

private:
    struct ParsedAtom {
        AtomRecord record;
        bool bracket = false;
    };
    struct OpenRing {
        std::uint32_t atom;
        std::optional<BondOrder> order;
    };

    [[noreturn]] void fail(Errc code, const std::string& msg) const {
        throw Error(code, msg + " at position " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
    }

    bool at(char c) const { return pos_ < s_.size() && s_[pos_] == c; }
    bool at_digit() const { return pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])); }

    int read_number(int max_digits) {
        int value = 0, digits = 0;
        while (at_digit() && digits < max_digits) {
            value = value * 10 + (s_[pos_] - '0');
            ++pos_;
            ++digits;
        }
        return value;
    }

    ParsedAtom parse_organic_atom() {
        const char c = s_[pos_];
        ParsedAtom atom;
        if (c == 'C' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
            atom.record.element = "Cl";
            pos_ += 2;
        } else if (c == 'B' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
            atom.record.element = "Br";
            pos_ += 2;
        } else if (std::string_view("BCNOPSFI").find(c) != std::string_view::npos) {
            atom.record.element = std::string(1, c);
            ++pos_;
        } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
            atom.record.element = std::string(1, static_cast<char>(std::toupper(c)));
            atom.record.aromatic = true;
            ++pos_;
        } else {
            fail(Errc::UnknownSymbol, std::string("unknown atom symbol '") + c + "'");
        }
        return atom;
    }

    ParsedAtom parse_bracket_atom() {
        ParsedAtom atom;
        atom.bracket = true;
        ++pos_;  // '['
        read_number(4);  // isotope, discarded
        if (pos_ >= s_.size()) fail(Errc::UnknownSymbol, "unterminated bracket atom");
        const char c = s_[pos_];
        if (std::isupper(static_cast<unsigned char>(c))) {
            if (pos_ + 1 < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_ + 1])) &&
                is_element_symbol(s_.substr(pos_, 2))) {
                atom.record.element = std::string(s_.substr(pos_, 2));
                pos_ += 2;
            } else if (is_element_symbol(s_.substr(pos_, 1))) {
                atom.record.element = std::string(1, c);
                ++pos_;
            } else {
                fail(Errc::UnknownSymbol, "unknown element in bracket atom");
            }
        } else if (std::islower(static_cast<unsigned char>(c))) {
            static constexpr std::array<std::string_view, 3> kTwo = {"se", "as", "te"};
            const auto two = s_.substr(pos_, 2);
            if (std::find(kTwo.begin(), kTwo.end(), two) != kTwo.end()) {
                atom.record.element = {static_cast<char>(std::toupper(two[0])), two[1]};
                pos_ += 2;
            } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
                atom.record.element = std::string(1, static_cast<char>(std::toupper(c)));
                ++pos_;
            } else {
                fail(Errc::UnknownSymbol, "unknown aromatic symbol in bracket atom");
            }
            atom.record.aromatic = true;
        } else {
            fail(Errc::UnknownSymbol, "bracket atom without element symbol");
        }

        // chirality: @, @@, @TH1, @AL2, @SP3, @TB12, @OH30 (all discarded)
        if (at('@')) {
            ++pos_;
            if (at('@')) {
                ++pos_;
            } else {
                static constexpr std::array<std::string_view, 5> kClasses = {"TH", "AL", "SP", "TB", "OH"};
                const auto tag = s_.substr(pos_, 2);
                if (std::find(kClasses.begin(), kClasses.end(), tag) != kClasses.end()) {
                    pos_ += 2;
                    if (!at_digit()) fail(Errc::UnknownSymbol, "chirality class without number");
                    read_number(2);
                }
            }
        }
        if (at('H')) {
            ++pos_;
            atom.record.explicit_h = at_digit() ? read_number(1) : 1;
        }
        if (at('+') || at('-')) {
            const char sign = s_[pos_];
            ++pos_;
            int magnitude = 1;
            if (at_digit()) {
                magnitude = read_number(2);
            } else {
                while (at(sign)) {
                    ++magnitude;
                    ++pos_;
                }
            }
            if (at('+') || at('-') || magnitude > 15) fail(Errc::InvalidCharge, "malformed charge");
            atom.record.formal_charge = sign == '+' ? magnitude : -magnitude;
        }
        if (at(':')) {
            ++pos_;
            if (!at_digit()) fail(Errc::UnknownSymbol, "atom class without number");
            read_number(8);
        }
        if (!at(']')) {
            if (pos_ >= s_.size()) fail(Errc::UnknownSymbol, "unterminated bracket atom");
            fail(Errc::UnknownSymbol, "unexpected character in bracket atom");
        }
        ++pos_;
        return atom;
    }

    BondOrder default_order(std::uint32_t a, std::uint32_t b) const {
        return atoms_[a].record.aromatic && atoms_[b].record.aromatic ? BondOrder::Aromatic
                                                                       : BondOrder::Single;
    }

    void add_bond(std::uint32_t a, std::uint32_t b, BondOrder order) {
        if (a == b) fail(Errc::UnmatchedRingClosure, "ring closure bonds an atom to itself");
        for (const auto& bond : bonds_) {
            if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) {
                fail(Errc::UnmatchedRingClosure, "ring closure duplicates an existing bond");
            }
        }
        bonds_.push_back({a, b, order});
    }

    void add_atom(ParsedAtom atom) {
        const auto idx = static_cast<std::uint32_t>(atoms_.size());
        atoms_.push_back(std::move(atom));
        if (prev_) {
            add_bond(*prev_, idx, pending_.value_or(default_order(*prev_, idx)));
        }
        pending_.reset();
        prev_ = idx;
    }

    void ring_closure() {
        if (!prev_) fail(Errc::UnknownSymbol, "ring-closure digit without a preceding atom");
        int number;
        if (at('%')) {
            ++pos_;
            if (pos_ + 1 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_])) ||
                !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1]))) {
                fail(Errc::UnknownSymbol, "'%' must be followed by two digits");
            }
            number = read_number(2);
        } else {
            number = s_[pos_] - '0';
            ++pos_;
        }
        auto it = rings_.find(number);
        if (it == rings_.end()) {
            rings_.emplace(number, OpenRing{*prev_, pending_});
        } else {
            const OpenRing open = it->second;
            rings_.erase(it);
            if (open.order && pending_ && *open.order != *pending_) {
                fail(Errc::UnknownSymbol, "conflicting ring-closure bond symbols");
            }
            const auto order = pending_ ? *pending_ : open.order ? *open.order : default_order(open.atom, *prev_);
            add_bond(open.atom, *prev_, order);
        }
        pending_.reset();
    }

    void assign_implicit_hydrogens() {
        std::vector<int> valence(atoms_.size(), 0);
        for (const auto& bond : bonds_) {
            valence[bond.a] += bond_valence(bond.order);
            valence[bond.b] += bond_valence(bond.order);
        }
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            auto& atom = atoms_[i];
            if (atom.bracket) continue;
            const int used = valence[i] + (atom.record.aromatic ? 1 : 0);
            const auto valences = organic_valences(atom.record.element);
            int h = 0;
            if (atom.record.aromatic) {
                // aromatic atoms only take their lowest valence (thiophene s, pyrrole-type n)
                h = std::max(0, valences.front() - used);
            } else {
                for (int v : valences) {
                    if (v >= used) {
                        h = v - used;
                        break;
                    }
                }
            }
            atom.record.explicit_h = h;
        }
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::vector<ParsedAtom> atoms_;
    std::vector<BondRecord> bonds_;
    std::optional<std::uint32_t> prev_;
    std::optional<BondOrder> pending_;
    std::vector<std::pair<std::uint32_t, std::size_t>> branches_;
    std::map<int, OpenRing> rings_;
};

} // namespace detail

/// Parses the supported SMILES subset: organic-subset and bracket atoms,
/// branches, ring closures (including %nn), bond symbols - = # : / \ and '.'.
/// Stereo marks, isotopes and atom classes are read and dropped; '/' and '\'
/// become single bonds. Aromaticity is taken verbatim from lowercase symbols.
inline MolGraph parse_smiles(std::string_view smiles) {
    return detail::SmilesParser(smiles).run();
}

} // namespace molbo

#endif
