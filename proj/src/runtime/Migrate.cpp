#include "RuntimeImpl.h"

#include <gransim/util/Errors.h>

namespace gransim::runtime {

using migration::MigrationDecision;

void Runtime::Impl::migrationCheck(App& app, std::function<void(App&)> then)
{
    uint64_t checkIndex = app.result.migrationChecks++;
    auto policy = app.options.migrationPolicy;
    if (!policy) {
        then(app);
        return;
    }
    Team& t = *app.team;

    migration::PlacementView view;
    view.app = app.id;
    view.checkIndex = checkIndex;
    for (int idx = 0; idx < t.size(); idx++) {
        const Granule& g = member(app, idx);
        view.granules.push_back({ g.id, idx, g.node, g.semantics });
    }
    for (const auto& n : scheduler.allNodes()) {
        view.freeCores[n.nodeId()] = n.freeCores();
    }

    auto abort = [&]() {
        app.result.migrationsAborted++;
        then(app);
    };

    MigrationDecision decision;
    try {
        decision = app.planner.planMigrations(*policy, view);
    } catch (const ContractViolation&) {
        abort();
        return;
    }
    if (decision.empty()) {
        then(app);
        return;
    }
    std::map<GranuleId, int> indexOf;
    for (const auto& loc : view.granules) {
        indexOf[loc.granule] = loc.groupIndex;
    }
    for (const auto& m : decision.moves) {
        auto it = indexOf.find(m.granule);
        if (it == indexOf.end() || member(app, it->second).node != m.src ||
            m.dst < 0 || m.dst >= scheduler.nodeCount()) {
            abort();
            return;
        }
    }
    if (!app.options.manageCores ||
        !migration::respectsThreadGrouping(decision, view)) {
        abort();
        return;
    }
    bool reserved = migration::reserveAll(
      decision,
      [&](NodeId n) {
          try {
              scheduler.reserve(n, 1, app.id);
              return true;
          } catch (const ReservationError&) {
              return false;
          }
      },
      [&](NodeId n) { scheduler.release(n, 1, app.id); });
    if (!reserved) {
        abort();
        return;
    }
    coresChanged();

    // Every moved granule ships its snapshot, and queued messages travel
    // with its index. The main node commits once all moves have landed.
    auto remaining = std::make_shared<size_t>(decision.moves.size());
    uint64_t seq = t.seq;
    NodeId main = reportNode(t);
    auto commit = [this, seq, decision, indexOf, then](App& a) {
        Team* tt = currentTeam(a, seq);
        if (tt == nullptr) {
            return;
        }
        for (const auto& m : decision.moves) {
            int idx = indexOf.at(m.granule);
            Granule& g = member(a, idx);
            resident[m.src]--;
            resident[m.dst]++;
            g.node = m.dst;
            if (tt->region) {
                if (!tt->region->hasReplica(m.dst)) {
                    tt->region->addReplica(m.dst);
                }
                g.memory = tt->region->replica(m.dst).working;
            } else {
                g.memory = std::make_shared<Bytes>(g.mem());
            }
            tt->group.move(idx, m.dst);
            g.setStatus(GranuleStatus::BlockedBarrier);
            scheduler.release(m.src, 1, a.id);
        }
        if (tt->region) {
            for (NodeId n : tt->region->replicaNodes()) {
                if (tt->group.indexesOn(n).empty()) {
                    tt->region->dropReplica(n);
                }
            }
        }
        a.planner.markCommitted(decision);
        a.result.migrationsCommitted++;
        a.result.granulesMigrated += decision.moves.size();
        coresChanged();
        then(a);
    };

    for (const auto& m : decision.moves) {
        Granule& g = member(app, indexOf.at(m.granule));
        g.setStatus(GranuleStatus::Migrating);
        size_t pages = g.mem().size() / snapshot::PAGE_SIZE;
        send(
          app,
          m.src,
          m.dst,
          pages * snapshot::PAGE_SIZE + 64,
          "migration",
          [this, m, main, remaining, commit](App& a) {
              send(a, m.dst, main, 16, "migration-ack", [remaining, commit](
                                                           App& a2) {
                  if (--*remaining == 0) {
                      commit(a2);
                  }
              });
          },
          config.snapshotTransferCost * pages);
    }
}

}
