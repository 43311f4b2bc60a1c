#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "georep/core.hpp"

namespace georep {

enum class Provenance : std::uint8_t { AutoEqual, AutoNotEqual, Adjudicated, NonConforming, Unscored };

inline std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::AutoEqual: return "AutoEqual";
        case Provenance::AutoNotEqual: return "AutoNotEqual";
        case Provenance::Adjudicated: return "Adjudicated";
        case Provenance::NonConforming: return "NonConforming";
        case Provenance::Unscored: return "Unscored";
    }
    return "?";
}

inline std::optional<Provenance> provenance_from_string(std::string_view s) {
    for (auto v : {Provenance::AutoEqual, Provenance::AutoNotEqual, Provenance::Adjudicated,
                   Provenance::NonConforming, Provenance::Unscored})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

using RepTriple = std::array<bool, 3>;  // indexed by index_of(Representation)

// N x 3 grid of correctness indicators over scored problems only.
struct CorrectnessMatrix {
    std::string run_id;
    std::string dataset_checksum;
    std::vector<std::string> problem_ids;
    std::vector<RepTriple> correct;
    std::vector<bool> same_answer_all3;
    std::vector<std::array<Provenance, 3>> provenance;
    std::vector<RepTriple> pending;         // awaiting adjudication (scored incorrect meanwhile)
    std::vector<std::string> unscored_ids;  // excluded from N

    std::size_t size() const { return problem_ids.size(); }
    bool empty() const { return problem_ids.empty(); }

    std::size_t pending_count() const {
        std::size_t n = 0;
        for (const auto& row : pending)
            for (bool b : row) n += b;
        return n;
    }

    void add_row(std::string id, RepTriple c, bool same, std::array<Provenance, 3> prov, RepTriple pend = {}) {
        problem_ids.push_back(std::move(id));
        correct.push_back(c);
        same_answer_all3.push_back(same);
        provenance.push_back(prov);
        pending.push_back(pend);
    }

    // Synthetic matrix from bare correctness rows; all-correct rows are
    // marked same-answer, everything else follows `same` (default false).
    static CorrectnessMatrix from_rows(const std::vector<RepTriple>& rows, const std::vector<bool>& same = {}) {
        CorrectnessMatrix m;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::array<Provenance, 3> prov{};
            for (std::size_t r = 0; r < 3; ++r) prov[r] = rows[i][r] ? Provenance::AutoEqual : Provenance::AutoNotEqual;
            const bool all = rows[i][0] && rows[i][1] && rows[i][2];
            const bool s = all || (i < same.size() && same[i]);
            m.add_row("row" + std::to_string(i + 1), rows[i], s, prov);
        }
        return m;
    }
};

inline nlohmann::json to_json(const CorrectnessMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        nlohmann::json row = {{"problem_id", m.problem_ids[i]}, {"same_answer_all3", static_cast<bool>(m.same_answer_all3[i])}};
        for (Representation r : kRepresentations) {
            const auto k = index_of(r);
            row[std::string(to_key(r))] = {{"correct", m.correct[i][k]},
                                          {"provenance", to_string(m.provenance[i][k])},
                                          {"pending", m.pending[i][k]}};
        }
        rows.push_back(std::move(row));
    }
    return {{"run_id", m.run_id},
            {"dataset_checksum", m.dataset_checksum},
            {"rows", std::move(rows)},
            {"unscored", m.unscored_ids},
            {"pending", m.pending_count()}};
}

inline CorrectnessMatrix matrix_from_json(const nlohmann::json& j) {
    CorrectnessMatrix m;
    m.run_id = j.value("run_id", std::string{});
    m.dataset_checksum = j.value("dataset_checksum", std::string{});
    for (const auto& row : j.at("rows")) {
        RepTriple c{}, pend{};
        std::array<Provenance, 3> prov{};
        for (Representation r : kRepresentations) {
            const auto& cell = row.at(std::string(to_key(r)));
            const auto k = index_of(r);
            c[k] = cell.at("correct").get<bool>();
            pend[k] = cell.value("pending", false);
            const auto p = provenance_from_string(cell.value("provenance", std::string("AutoNotEqual")));
            if (!p) throw Error("unknown provenance in matrix");
            prov[k] = *p;
        }
        m.add_row(row.at("problem_id").get<std::string>(), c, row.at("same_answer_all3").get<bool>(), prov, pend);
    }
    if (j.contains("unscored")) m.unscored_ids = j.at("unscored").get<std::vector<std::string>>();
    return m;
}

}  // namespace georep
