#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "georep/metrics.hpp"
#include "georep/run.hpp"
#include "georep/scoring.hpp"
#include "georep/transport.hpp"
#include "support/oracles.hpp"

using namespace georep;
namespace fs = std::filesystem;
using canon::TriageReason;

namespace {

const fs::path kFixtures = GEOREP_FIXTURES;

struct Fixture {
    ProblemSet problems = load_dataset(kFixtures / "problems5.jsonl");
    RunRecord run;

    Fixture() {
        ModelSpec spec;
        spec.model_id = "stub/model";
        spec.retry_backoff = std::chrono::milliseconds(0);
        ReplayTransport t = ReplayTransport::from_file(kFixtures / "transcript_direct.jsonl");
        RunOptions o;
        o.clock = [] { return std::string("2000-01-01T00:00:00Z"); };
        run = run_model(spec, problems, RunMode::Direct, t, o);
    }
};

std::size_t row(const CorrectnessMatrix& m, const std::string& id) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m.problem_ids[i] == id) return i;
    FAIL("missing row " << id);
    return 0;
}

AdjudicationRecord verdict(const RunRecord& run, const std::string& id, Representation r, Verdict v) {
    AdjudicationRecord rec;
    rec.run_id = run.run_id;
    rec.problem_id = id;
    rec.representation = r;
    rec.verdict = v;
    rec.annotator = "tester";
    return rec;
}

}  // namespace

TEST_CASE("scoring the fixture run") {
    const Fixture fx;
    AdjudicationStore store;
    const CorrectnessMatrix m = score_run(fx.run, fx.problems, store);
    REQUIRE(m.size() == 5);
    CHECK(m.run_id == fx.run.run_id);
    CHECK(m.dataset_checksum == fx.problems.manifest.checksum);

    const auto r1 = row(m, "fx-001");
    CHECK(m.correct[r1] == RepTriple{true, false, true});
    CHECK(m.provenance[r1][1] == Provenance::NonConforming);
    CHECK(m.pending[r1][1]);

    const auto r3 = row(m, "fx-003");
    CHECK(m.correct[r3] == RepTriple{true, true, false});
    CHECK(m.provenance[r3][0] == Provenance::AutoEqual);
    CHECK(m.provenance[r3][1] == Provenance::AutoEqual);
    CHECK(m.provenance[r3][2] == Provenance::NonConforming);
    CHECK_FALSE(m.pending[r3][2]);

    const auto r2 = row(m, "fx-002");
    CHECK(m.correct[r2] == RepTriple{true, true, false});
    CHECK(m.provenance[r2][2] == Provenance::AutoNotEqual);

    const auto r5 = row(m, "fx-005");
    CHECK(m.correct[r5] == RepTriple{true, true, false});

    CHECK(m.pending_count() == 3);

    const auto queue = adjudication_queue(fx.run, fx.problems, store);
    REQUIRE(queue.size() == 3);
    CHECK(queue[0].problem_id == "fx-001");
    CHECK(queue[0].representation == Representation::Coordinate);
    CHECK(queue[0].reason == TriageReason::DecimalApproximation);
    CHECK(queue[0].model_answer == "3.162");
    CHECK(queue[0].gold_answer == "sqrt(10)");
    CHECK(queue[1].problem_id == "fx-004");
    CHECK(queue[1].representation == Representation::Coordinate);
    CHECK(queue[2].problem_id == "fx-004");
    CHECK(queue[2].representation == Representation::Vector);
    CHECK(queue[2].reason == TriageReason::OpaqueVsExact);
}

TEST_CASE("an Equivalent verdict turns a pending cell correct") {
    const Fixture fx;
    AdjudicationStore store;
    apply_adjudication(verdict(fx.run, "fx-001", Representation::Coordinate, Verdict::Equivalent), fx.run,
                       fx.problems, store);
    const CorrectnessMatrix m = score_run(fx.run, fx.problems, store);
    const auto r1 = row(m, "fx-001");
    CHECK(m.correct[r1][1]);
    CHECK(m.provenance[r1][1] == Provenance::Adjudicated);
    CHECK_FALSE(m.pending[r1][1]);

    const auto rec = store.latest(fx.run.run_id, "fx-001", Representation::Coordinate);
    REQUIRE(rec);
    CHECK(rec->model_answer == "3.162");
    CHECK(rec->gold_answer == "sqrt(10)");
    CHECK_FALSE(rec->timestamp.empty());

    // adjudicated items leave the queue
    const auto queue = adjudication_queue(fx.run, fx.problems, store);
    CHECK(queue.size() == 2);
    for (const auto& q : queue) CHECK(q.problem_id == "fx-004");
}

TEST_CASE("a single opaque gold against an exact-looking answer queues once") {
    const std::string bytes =
        R"J({"id":"A1","source":"Custom","category":"AngleDirection","gold_answer":"arccos(1/sqrt(3))","euclidean":"e","coordinate":"c","vector":"v"})J"
        "\n";
    const ProblemSet ps = parse_dataset(bytes, "one");
    RunRecord run;
    run.run_id = "r";
    const std::array<std::string, 3> answers = {"arccos(1/sqrt(3))", "0.9553", "arccos(sqrt(3)/3)"};
    for (Representation r : kRepresentations) {
        RunEntry e;
        e.problem_id = "A1";
        e.representation = r;
        e.response = extract_answer(nlohmann::json({{"reasoning", "x"}, {"numeric_answer", answers[index_of(r)]}}).dump());
        run.entries.push_back(e);
    }
    const auto queue = adjudication_queue(run, ps, AdjudicationStore{});
    REQUIRE(queue.size() == 1);
    CHECK(queue[0].representation == Representation::Coordinate);
}

TEST_CASE("a fully auto-scored run has an empty queue") {
    const Fixture fx;
    RunRecord run = fx.run;
    std::erase_if(run.entries, [](const RunEntry& e) { return e.problem_id == "fx-001" || e.problem_id == "fx-004"; });
    CHECK(adjudication_queue(run, fx.problems, AdjudicationStore{}).empty());
    const CorrectnessMatrix m = score_run(run, fx.problems, AdjudicationStore{});
    CHECK(m.size() == 3);
    CHECK(m.unscored_ids == std::vector<std::string>{"fx-001", "fx-004"});
}

TEST_CASE("adjudication errors") {
    const Fixture fx;
    AdjudicationStore store;
    CHECK_THROWS_AS(apply_adjudication(verdict(fx.run, "nope", Representation::Vector, Verdict::Equivalent), fx.run,
                                       fx.problems, store),
                    UnknownEntry);
    auto wrong_run = verdict(fx.run, "fx-001", Representation::Coordinate, Verdict::Equivalent);
    wrong_run.run_id = "other-run";
    CHECK_THROWS_AS(apply_adjudication(wrong_run, fx.run, fx.problems, store), UnknownEntry);
    CHECK(store.size() == 0);

    RunRecord bad = fx.run;
    bad.entries.push_back(bad.entries.front());
    bad.entries.back().problem_id = "ghost";
    CHECK_THROWS_AS(score_run(bad, fx.problems, store), DatasetMismatch);
}

TEST_CASE("re-adjudication appends and the latest verdict wins") {
    const Fixture fx;
    const fs::path path = fs::temp_directory_path() / "georep-tests" / "adjudications.jsonl";
    fs::create_directories(path.parent_path());
    fs::remove(path);
    {
        AdjudicationStore store(path);
        apply_adjudication(verdict(fx.run, "fx-004", Representation::Vector, Verdict::Equivalent), fx.run,
                           fx.problems, store);
        apply_adjudication(verdict(fx.run, "fx-004", Representation::Vector, Verdict::NotEquivalent), fx.run,
                           fx.problems, store);
        CHECK(store.size() == 2);
    }
    const AdjudicationStore reloaded(path);
    REQUIRE(reloaded.size() == 2);
    CHECK(reloaded.history()[0].verdict == Verdict::Equivalent);
    CHECK(reloaded.latest(fx.run.run_id, "fx-004", Representation::Vector)->verdict == Verdict::NotEquivalent);

    const CorrectnessMatrix m = score_run(fx.run, fx.problems, reloaded);
    const auto r4 = row(m, "fx-004");
    CHECK_FALSE(m.correct[r4][2]);
    CHECK(m.provenance[r4][2] == Provenance::Adjudicated);

    const auto round = AdjudicationStore::from_records(AdjudicationStore::parse_records(reloaded.serialize()));
    CHECK(round.serialize() == reloaded.serialize());
    CHECK_THROWS_AS(AdjudicationStore::parse_records("{\"run_id\":1}\n"), SchemaError);
}

TEST_CASE("matrix JSON round trip") {
    const Fixture fx;
    const CorrectnessMatrix m = score_run(fx.run, fx.problems, AdjudicationStore{});
    const CorrectnessMatrix back = matrix_from_json(to_json(m));
    CHECK(to_json(back) == to_json(m));
    CHECK(back.correct == m.correct);
    CHECK(back.pending == m.pending);
    CHECK(back.provenance == m.provenance);
}

TEST_CASE("scored matrices satisfy the cross-representation properties") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
        const auto fx = testgen::random_scored_run(rng, 20);
        const CorrectnessMatrix m = score_run(fx.run, fx.problems, AdjudicationStore{});
        REQUIRE(m.size() == 20);
        CHECK(consistency3(m).count >= invariance3(m).count);
        for (std::size_t i = 0; i < m.size(); ++i) {
            for (std::size_t r = 0; r < 3; ++r) {
                if (m.correct[i][r]) CHECK(m.provenance[i][r] == Provenance::AutoEqual);
                if (m.pending[i][r]) CHECK_FALSE(m.correct[i][r]);
            }
        }
    }
}
