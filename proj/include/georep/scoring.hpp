#pragma once

// Run records -> correctness matrix, plus the human adjudication loop.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "georep/canon.hpp"
#include "georep/core.hpp"
#include "georep/dataset.hpp"
#include "georep/matrix.hpp"
#include "georep/run.hpp"

namespace georep {

enum class Verdict : std::uint8_t { Equivalent, NotEquivalent };

inline std::string_view to_string(Verdict v) { return v == Verdict::Equivalent ? "Equivalent" : "NotEquivalent"; }

inline std::optional<Verdict> verdict_from_string(std::string_view s) {
    if (s == "Equivalent") return Verdict::Equivalent;
    if (s == "NotEquivalent") return Verdict::NotEquivalent;
    return std::nullopt;
}

struct AdjudicationRecord {
    std::string run_id;
    std::string problem_id;
    Representation representation = Representation::Euclidean;
    std::string model_answer;
    std::string gold_answer;
    Verdict verdict = Verdict::NotEquivalent;
    std::string annotator;
    std::string note;
    std::string timestamp;
};

inline nlohmann::json to_json(const AdjudicationRecord& r) {
    return {{"run_id", r.run_id},
            {"problem_id", r.problem_id},
            {"representation", to_key(r.representation)},
            {"model_answer", r.model_answer},
            {"gold_answer", r.gold_answer},
            {"verdict", to_string(r.verdict)},
            {"annotator", r.annotator},
            {"note", r.note},
            {"timestamp", r.timestamp}};
}

inline AdjudicationRecord adjudication_from_json(const nlohmann::json& j) {
    AdjudicationRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.problem_id = j.at("problem_id").get<std::string>();
    const auto rep = representation_from_key(j.at("representation").get<std::string>());
    if (!rep) throw Error("unknown representation in adjudication record");
    r.representation = *rep;
    r.model_answer = j.value("model_answer", std::string{});
    r.gold_answer = j.value("gold_answer", std::string{});
    const auto v = verdict_from_string(j.at("verdict").get<std::string>());
    if (!v) throw Error("unknown verdict in adjudication record");
    r.verdict = *v;
    r.annotator = j.value("annotator", std::string{});
    r.note = j.value("note", std::string{});
    r.timestamp = j.value("timestamp", std::string{});
    return r;
}

// Append-only verdict log. Re-adjudication appends; the latest record for a
// (run, problem, representation) key wins and the full history is kept.
// Writes are serialized; a store is meant to have a single writer process.
class AdjudicationStore {
public:
    AdjudicationStore() = default;
    explicit AdjudicationStore(std::filesystem::path path) : path_(std::move(path)) {
        if (std::filesystem::exists(*path_)) load(read_file(*path_));
    }
    AdjudicationStore(AdjudicationStore&& other) noexcept
        : path_(std::move(other.path_)), history_(std::move(other.history_)), latest_(std::move(other.latest_)) {}

    static AdjudicationStore from_records(const std::vector<AdjudicationRecord>& records) {
        AdjudicationStore s;
        for (const auto& r : records) s.index(r);
        return s;
    }

    void append(const AdjudicationRecord& record) {
        std::lock_guard lock(mutex_);
        if (path_) {
            std::ofstream out(*path_, std::ios::binary | std::ios::app);
            if (!out) throw IOError("cannot append to " + path_->string());
            out << to_json(record).dump() << '\n';
            out.flush();
            if (!out) throw IOError("error writing " + path_->string());
        }
        index(record);
    }

    std::optional<AdjudicationRecord> latest(std::string_view run_id, std::string_view problem_id,
                                             Representation r) const {
        std::lock_guard lock(mutex_);
        auto it = latest_.find(std::make_tuple(std::string(run_id), std::string(problem_id), r));
        if (it == latest_.end()) return std::nullopt;
        return history_[it->second];
    }

    std::vector<AdjudicationRecord> history() const {
        std::lock_guard lock(mutex_);
        return history_;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return history_.size();
    }

    // Line-delimited export of the full history.
    std::string serialize() const {
        std::lock_guard lock(mutex_);
        std::string out;
        for (const auto& r : history_) out += to_json(r).dump() + "\n";
        return out;
    }

    static std::vector<AdjudicationRecord> parse_records(const std::string& text) {
        std::vector<AdjudicationRecord> out;
        std::istringstream in(text);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                out.push_back(adjudication_from_json(nlohmann::json::parse(line)));
            } catch (const nlohmann::json::exception& e) {
                throw SchemaError(n, std::string("adjudication record: ") + e.what());
            } catch (const SchemaError&) {
                throw;
            } catch (const Error& e) {
                throw SchemaError(n, e.what());
            }
        }
        return out;
    }

private:
    using Key = std::tuple<std::string, std::string, Representation>;

    void load(const std::string& text) {
        for (const auto& r : parse_records(text)) index(r);
    }

    void index(const AdjudicationRecord& r) {
        latest_[std::make_tuple(r.run_id, r.problem_id, r.representation)] = history_.size();
        history_.push_back(r);
    }

    std::optional<std::filesystem::path> path_;
    mutable std::mutex mutex_;
    std::vector<AdjudicationRecord> history_;
    std::map<Key, std::size_t> latest_;
};

// ─── Scoring ──────────────────────────────────────────────────────────────

struct CellScore {
    bool correct = false;
    Provenance provenance = Provenance::Unscored;
    bool pending = false;
    std::optional<canon::TriageReason> reason;
};

inline CellScore score_cell(const RunRecord& run, const Problem& p, const RunEntry* entry,
                            const AdjudicationStore& store) {
    CellScore s;
    if (!entry) return s;
    if (!entry->response.valid()) {
        s.provenance = Provenance::NonConforming;
        return s;
    }
    const auto verdict = canon::equivalent(entry->response.numeric_answer, p.gold_answer);
    switch (verdict.kind) {
        case canon::EquivalenceVerdict::Kind::Equal:
            s.correct = true;
            s.provenance = Provenance::AutoEqual;
            return s;
        case canon::EquivalenceVerdict::Kind::NotEqual:
            s.provenance = Provenance::AutoNotEqual;
            return s;
        case canon::EquivalenceVerdict::Kind::NeedsAdjudication:
            s.reason = verdict.reason;
            if (auto rec = store.latest(run.run_id, p.id, entry->representation)) {
                s.provenance = Provenance::Adjudicated;
                s.correct = rec->verdict == Verdict::Equivalent;
            } else {
                s.provenance = Provenance::NonConforming;
                s.pending = true;
            }
            return s;
    }
    return s;
}

/// Pure function of (run, dataset, adjudications). Rows with any missing
/// entry, and problems that failed validation, are Unscored and excluded.
inline CorrectnessMatrix score_run(const RunRecord& run, const ProblemSet& ps, const AdjudicationStore& store) {
    for (const auto& e : run.entries)
        if (!ps.find(e.problem_id)) throw DatasetMismatch("run references unknown problem \"" + e.problem_id + "\"");

    CorrectnessMatrix m;
    m.run_id = run.run_id;
    m.dataset_checksum = ps.manifest.checksum;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const Problem& p = ps.problems[i];
        std::array<const RunEntry*, 3> entries{};
        std::array<CellScore, 3> cells{};
        bool complete = ps.admitted(i);
        for (Representation r : kRepresentations) {
            const auto k = index_of(r);
            entries[k] = run.find(p.id, r);
            cells[k] = score_cell(run, p, entries[k], store);
            complete = complete && entries[k] != nullptr;
        }
        if (!complete) {
            m.unscored_ids.push_back(p.id);
            continue;
        }
        // Two predictions are the same output when canonically Equal, or when
        // both were judged correct against the gold answer.
        auto same = [&](std::size_t a, std::size_t b) {
            if (!entries[a]->response.valid() || !entries[b]->response.valid()) return false;
            if (cells[a].correct && cells[b].correct) return true;
            return canon::equivalent(entries[a]->response.numeric_answer, entries[b]->response.numeric_answer)
                .is_equal();
        };
        const bool all_same = same(0, 1) && same(1, 2) && same(0, 2);
        m.add_row(p.id, {cells[0].correct, cells[1].correct, cells[2].correct}, all_same,
                  {cells[0].provenance, cells[1].provenance, cells[2].provenance},
                  {cells[0].pending, cells[1].pending, cells[2].pending});
    }
    return m;
}

struct QueueItem {
    std::string run_id;
    std::string problem_id;
    Representation representation = Representation::Euclidean;
    std::string model_answer;
    std::string gold_answer;
    std::string reasoning;
    canon::TriageReason reason = canon::TriageReason::Unparseable;
};

inline nlohmann::json to_json(const QueueItem& q) {
    return {{"run_id", q.run_id},
            {"problem_id", q.problem_id},
            {"representation", to_key(q.representation)},
            {"model_answer", q.model_answer},
            {"gold_answer", q.gold_answer},
            {"reasoning", q.reasoning},
            {"reason", canon::to_string(q.reason)}};
}

/// Pending items in dataset order, then representation order. Problems
/// admitted only by a permissive load are included.
inline std::vector<QueueItem> adjudication_queue(const RunRecord& run, const ProblemSet& ps,
                                                 const AdjudicationStore& store) {
    std::vector<QueueItem> queue;
    for (const Problem& p : ps.problems) {
        for (Representation r : kRepresentations) {
            const RunEntry* e = run.find(p.id, r);
            if (!e) continue;
            const CellScore s = score_cell(run, p, e, store);
            if (!s.pending) continue;
            queue.push_back({run.run_id, p.id, r, e->response.numeric_answer, p.gold_answer, e->response.reasoning,
                             *s.reason});
        }
    }
    return queue;
}

/// Persists a verdict for an existing run entry.
inline void apply_adjudication(AdjudicationRecord record, const RunRecord& run, const ProblemSet& ps,
                               AdjudicationStore& store) {
    if (record.run_id.empty()) record.run_id = run.run_id;
    const RunEntry* e = run.find(record.problem_id, record.representation);
    const Problem* p = ps.find(record.problem_id);
    if (record.run_id != run.run_id || !e || !p) {
        throw UnknownEntry("no run entry for " + record.run_id + "/" + record.problem_id + "/" +
                           std::string(to_key(record.representation)));
    }
    if (record.model_answer.empty()) record.model_answer = e->response.numeric_answer;
    if (record.gold_answer.empty()) record.gold_answer = p->gold_answer;
    if (record.timestamp.empty()) record.timestamp = utc_timestamp();
    store.append(record);
}

}  // namespace georep
