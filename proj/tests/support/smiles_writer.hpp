#ifndef MOLBO_TESTS_SMILES_WRITER_HPP
#define MOLBO_TESTS_SMILES_WRITER_HPP

// Writes a MolGraph back to SMILES. With a seed, the start atom of each
// component and the neighbor visiting order are shuffled, giving a different
// spelling of the same molecule.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "molbo/smiles.hpp"

namespace molbo::fixtures {

inline bool is_organic(const std::string& el) {
    static const std::set<std::string> kOrganic = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};
    return kOrganic.count(el) > 0;
}

/// Implicit H count an organic-subset atom would get from the default valences.
inline int implied_h(const std::string& el, int bond_sum, bool aromatic) {
    std::vector<int> vals;
    if (el == "B") vals = {3};
    else if (el == "C") vals = {4};
    else if (el == "N" || el == "P") vals = {3, 5};
    else if (el == "O") vals = {2};
    else if (el == "S") vals = {2, 4, 6};
    else vals = {1};
    const int used = bond_sum + (aromatic ? 1 : 0);
    if (aromatic) return std::max(0, vals.front() - used);
    for (int v : vals) {
        if (v >= used) return v - used;
    }
    return 0;
}

class SmilesWriter {
public:
    explicit SmilesWriter(const MolGraph& g, std::optional<std::uint64_t> seed = std::nullopt) : g_(g) {
        if (seed) rng_.emplace(*seed);
    }

    std::string write() {
        const auto n = g_.atom_count();
        visited_.assign(n, false);
        order_.clear();
        std::vector<std::uint32_t> starts(n);
        for (std::uint32_t i = 0; i < n; ++i) starts[i] = i;
        if (rng_) std::shuffle(starts.begin(), starts.end(), *rng_);
        std::string out;
        for (auto s : starts) {
            if (visited_[s]) continue;
            if (!out.empty()) out += '.';
            plan_component(s);
            emit(s, std::nullopt, out);
        }
        return out;
    }

private:
    std::vector<std::uint32_t> shuffled_neighbors(std::uint32_t a) {
        std::vector<std::uint32_t> nb;
        for (const auto& x : g_.neighbors(a)) nb.push_back(x.atom);
        std::sort(nb.begin(), nb.end());
        if (rng_) std::shuffle(nb.begin(), nb.end(), *rng_);
        return nb;
    }

    BondOrder order_between(std::uint32_t a, std::uint32_t b) const {
        for (const auto& x : g_.neighbors(a)) {
            if (x.atom == b) return x.order;
        }
        return BondOrder::Single;
    }

    // DFS that fixes the spanning tree, child order and ring closures.
    void plan_component(std::uint32_t start) { visit(start, -1); }

    void visit(std::uint32_t a, std::int64_t parent) {
        visited_[a] = true;
        order_.push_back(a);
        pos_[a] = order_.size();
        for (auto b : shuffled_neighbors(a)) {
            if (static_cast<std::int64_t>(b) == parent) continue;
            if (visited_[b]) {
                // back edge to an ancestor: a closes a ring opened at b
                if (pos_[b] < pos_[a] && !closed_.count(key(a, b))) {
                    closed_.insert(key(a, b));
                    ring_open_[b].push_back(a);
                    ring_close_[a].push_back(b);
                }
                continue;
            }
            children_[a].push_back(b);
            visit(b, a);
        }
    }

    static std::uint64_t key(std::uint32_t a, std::uint32_t b) {
        return (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
    }

    std::string bond_symbol(std::uint32_t a, std::uint32_t b) const {
        const auto o = order_between(a, b);
        const auto& atoms = g_.atoms();
        switch (o) {
        case BondOrder::Single: return atoms[a].aromatic && atoms[b].aromatic ? "-" : "";
        case BondOrder::Double: return "=";
        case BondOrder::Triple: return "#";
        case BondOrder::Aromatic: return atoms[a].aromatic && atoms[b].aromatic ? "" : ":";
        }
        return "";
    }

    std::string atom_token(std::uint32_t a) const {
        const auto& at = g_.atoms()[a];
        int bond_sum = 0;
        for (const auto& x : g_.neighbors(a)) {
            bond_sum += x.order == BondOrder::Double ? 2 : x.order == BondOrder::Triple ? 3 : 1;
        }
        std::string sym = at.element;
        if (at.aromatic) {
            sym[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(sym[0])));
        }
        const bool organic_ok = is_organic(at.element) && at.formal_charge == 0 &&
                                implied_h(at.element, bond_sum, at.aromatic) == at.explicit_h;
        if (organic_ok) return sym;
        std::string t = "[" + sym;
        if (at.explicit_h == 1) t += "H";
        else if (at.explicit_h > 1) t += "H" + std::to_string(at.explicit_h);
        if (at.formal_charge > 0) t += "+" + (at.formal_charge > 1 ? std::to_string(at.formal_charge) : "");
        if (at.formal_charge < 0) t += "-" + (at.formal_charge < -1 ? std::to_string(-at.formal_charge) : "");
        return t + "]";
    }

    int take_digit() {
        int d = 1;
        while (used_digits_.count(d)) ++d;
        used_digits_.insert(d);
        return d;
    }

    static std::string digit_text(int d) { return d < 10 ? std::to_string(d) : "%" + std::to_string(d); }

    void emit(std::uint32_t a, std::optional<std::uint32_t> from, std::string& out) {
        if (from) out += bond_symbol(*from, a);
        out += atom_token(a);
        // closures first so freed digits can be reused by openings on this atom
        for (auto b : ring_close_[a]) {
            const int d = open_digit_.at(key(a, b));
            out += digit_text(d);
            used_digits_.erase(d);
        }
        for (auto b : ring_open_[a]) {
            const int d = take_digit();
            open_digit_[key(a, b)] = d;
            out += bond_symbol(a, b) + digit_text(d);
        }
        const auto& kids = children_[a];
        for (std::size_t i = 0; i < kids.size(); ++i) {
            const bool last = i + 1 == kids.size();
            if (!last) out += '(';
            emit(kids[i], a, out);
            if (!last) out += ')';
        }
    }

    const MolGraph& g_;
    std::optional<std::mt19937_64> rng_;
    std::vector<bool> visited_;
    std::vector<std::uint32_t> order_;
    std::map<std::uint32_t, std::size_t> pos_;
    std::map<std::uint32_t, std::vector<std::uint32_t>> children_, ring_open_, ring_close_;
    std::set<std::uint64_t> closed_;
    std::map<std::uint64_t, int> open_digit_;
    std::set<int> used_digits_;
};

inline std::string write_smiles(const MolGraph& g) { return SmilesWriter(g).write(); }

inline std::string random_smiles(const MolGraph& g, std::uint64_t seed) { return SmilesWriter(g, seed).write(); }

} // namespace molbo::fixtures

#endif
