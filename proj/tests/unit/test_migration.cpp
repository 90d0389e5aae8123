#include <catch_amalgamated.hpp>

#include "common/Gen.h"

#include <gransim/migration/Migration.h>

#include <set>

using namespace gransim;
using namespace gransim::migration;
using gransim::test::Gen;

namespace {

PlacementView makeView(const std::vector<NodeId>& placement,
                       std::map<NodeId, int> freeCores,
                       guest::Semantics sem = guest::Semantics::Process)
{
    PlacementView view;
    view.app = 1;
    for (size_t i = 0; i < placement.size(); i++) {
        view.granules.push_back(
          { 100 + i, static_cast<int>(i), placement[i], sem });
    }
    view.freeCores = std::move(freeCores);
    return view;
}

}

TEST_CASE("Consolidation empties the smallest node", "[migration]")
{
    ConsolidationPolicy policy;
    auto moves = policy.plan(makeView({ 0, 0, 0, 1 }, { { 0, 1 }, { 1, 3 } }));
    REQUIRE(moves == std::vector<Move>{ { 103, 1, 0 } });

    // Equal populations: the higher node id is emptied first
    moves = policy.plan(makeView({ 0, 0, 1, 1 }, { { 0, 2 }, { 1, 2 } }));
    REQUIRE(moves == std::vector<Move>{ { 102, 1, 0 }, { 103, 1, 0 } });

    // Not enough room anywhere
    moves = policy.plan(makeView({ 0, 0, 1, 1 }, { { 0, 1 }, { 1, 1 } }));
    REQUIRE(moves.empty());

    // Already on one node
    REQUIRE(policy.plan(makeView({ 2, 2 }, { { 2, 0 } })).empty());
}

TEST_CASE("Consolidation never overfills a node", "[migration]")
{
    Gen gen(14);
    ConsolidationPolicy policy;
    for (int round = 0; round < 300; round++) {
        int n = static_cast<int>(gen.intIn(1, 12));
        std::vector<NodeId> placement;
        for (int i = 0; i < n; i++) {
            placement.push_back(static_cast<NodeId>(gen.index(4)));
        }
        std::map<NodeId, int> freeCores;
        for (NodeId node = 0; node < 4; node++) {
            freeCores[node] = static_cast<int>(gen.intIn(0, 6));
        }
        auto view = makeView(placement, freeCores);
        auto moves = policy.plan(view);

        MigrationDecision d{ 1, moves, 1 };
        REQUIRE_NOTHROW(d.validate());
        std::set<NodeId> hosting(placement.begin(), placement.end());
        std::map<NodeId, int> delta;
        std::map<NodeId, int> population;
        for (NodeId p : placement) {
            population[p]++;
        }
        for (const auto& m : moves) {
            REQUIRE(hosting.contains(m.dst));
            REQUIRE(placement.at(m.granule - 100) == m.src);
            delta[m.dst]++;
            population[m.src]--;
            population[m.dst]++;
        }
        for (auto& [node, added] : delta) {
            REQUIRE(added <= freeCores[node]);
        }
        size_t after = 0;
        for (auto& [node, count] : population) {
            after += count > 0;
        }
        REQUIRE(after <= hosting.size());
        if (!moves.empty()) {
            REQUIRE(after < hosting.size());
        }
    }
}

TEST_CASE("Decisions reject bad moves", "[migration]")
{
    MigrationDecision self{ 1, { { 5, 2, 2 } }, 1 };
    REQUIRE_THROWS_AS(self.validate(), ContractViolation);
    MigrationDecision twice{ 1, { { 5, 0, 1 }, { 5, 1, 2 } }, 1 };
    REQUIRE_THROWS_AS(twice.validate(), ContractViolation);
}

TEST_CASE("Planner epochs only commit once", "[migration]")
{
    MigrationPlanner planner;
    ScriptedPolicy policy([](const PlacementView&) {
        return std::vector<Move>{ { 100, 0, 1 } };
    });
    auto view = makeView({ 0 }, { { 1, 1 } });
    auto first = planner.planMigrations(policy, view);
    auto second = planner.planMigrations(policy, view);
    REQUIRE(second.epoch == first.epoch + 1);
    REQUIRE_FALSE(planner.isCurrent(first));
    REQUIRE_THROWS_AS(planner.markCommitted(first), ProtocolError);
    planner.markCommitted(second);
    REQUIRE_THROWS_AS(planner.markCommitted(second), ProtocolError);
    REQUIRE(planner.latestEpoch() == 2);

    ScriptedPolicy bad([](const PlacementView&) {
        return std::vector<Move>{ { 100, 0, 0 } };
    });
    REQUIRE_THROWS_AS(planner.planMigrations(bad, view), ContractViolation);
}

TEST_CASE("Thread granules move with their siblings", "[migration]")
{
    auto view = makeView({ 0, 0, 1 }, {}, guest::Semantics::Thread);
    MigrationDecision all{ 1, { { 100, 0, 2 }, { 101, 0, 2 } }, 1 };
    MigrationDecision half{ 1, { { 100, 0, 2 } }, 1 };
    MigrationDecision split{ 1, { { 100, 0, 2 }, { 101, 0, 1 } }, 1 };
    REQUIRE(respectsThreadGrouping(all, view));
    REQUIRE_FALSE(respectsThreadGrouping(half, view));
    REQUIRE_FALSE(respectsThreadGrouping(split, view));

    auto procs = makeView({ 0, 0, 1 }, {});
    REQUIRE(respectsThreadGrouping(half, procs));
}

TEST_CASE("Reservations are all or nothing", "[migration]")
{
    MigrationDecision d{ 1, { { 1, 0, 1 }, { 2, 0, 2 }, { 3, 0, 1 } }, 1 };
    std::map<NodeId, int> freeCores{ { 1, 1 }, { 2, 1 } };
    auto tryReserve = [&](NodeId n) {
        if (freeCores[n] == 0) {
            return false;
        }
        freeCores[n]--;
        return true;
    };
    auto release = [&](NodeId n) { freeCores[n]++; };
    REQUIRE_FALSE(reserveAll(d, tryReserve, release));
    REQUIRE(freeCores == std::map<NodeId, int>{ { 1, 1 }, { 2, 1 } });

    freeCores[1] = 2;
    REQUIRE(reserveAll(d, tryReserve, release));
    REQUIRE(freeCores == std::map<NodeId, int>{ { 1, 0 }, { 2, 0 } });
}

TEST_CASE("Transfer delay scales with pages", "[migration]")
{
    cluster::ClusterConfig config;
    config.snapshotTransferCost = 3;
    REQUIRE(transferDelay(config, 0) == config.crossNodeLatency);
    REQUIRE(transferDelay(config, 10) == config.crossNodeLatency + 30);
}
