#include <gransim/harness/MigrationBench.h>
#include <gransim/harness/Programs.h>
#include <gransim/runtime/Runtime.h>
#include <gransim/util/Errors.h>

#include <cmath>
#include <sstream>

namespace gransim::harness {

namespace {

constexpr int GRANULES = 8;
constexpr int ITERATIONS = 50;
constexpr runtime::AppId TENANT = 1'000'000;

ProgramParams profileParams(BenchProfile profile)
{
    ProgramParams p;
    p.parallelism = GRANULES;
    p.iterations = ITERATIONS;
    if (profile == BenchProfile::Network) {
        p.workUnits = GRANULES * ITERATIONS * 4;
        p.vectorBytes = 64;
        p.memoryPages = 4;
    } else {
        p.workUnits = GRANULES * ITERATIONS * 400;
        p.vectorBytes = 8;
        p.memoryPages = 256;
    }
    return p;
}

enum class Layout
{
    Fragmented,
    Colocated,
};

cluster::Tick runOnce(BenchProfile profile,
                      Layout layout,
                      std::optional<double> migrateAt,
                      uint64_t* migrated)
{
    cluster::ClusterConfig config;
    config.nodeCount = 2;
    config.coresPerNode = 8;

    cluster::EventQueue queue;
    cluster::Transport transport(queue, config);
    scheduler::Scheduler sched(config.nodeCount, config.coresPerNode);
    runtime::Runtime rt(queue, transport, config, sched);

    auto program = std::make_shared<guest::GuestProgram>(
      guest::loadProgram(mpiComputeSource(profileParams(profile))));

    runtime::LaunchOptions opts;
    opts.appId = rt.allocateAppId();
    if (layout == Layout::Colocated) {
        sched.reserve(0, GRANULES, opts.appId);
        opts.pool.assign(GRANULES, 0);
    } else {
        sched.reserve(0, 4, TENANT);
        sched.reserve(1, 4, TENANT);
        sched.reserve(0, 4, opts.appId);
        sched.reserve(1, 4, opts.appId);
        opts.pool = { 0, 0, 0, 0, 1, 1, 1, 1 };
    }

    if (migrateAt) {
        auto threshold = static_cast<uint64_t>(
          std::llround(*migrateAt * ITERATIONS));
        auto released = std::make_shared<bool>(false);
        auto consolidate = std::make_shared<migration::ConsolidationPolicy>();
        opts.migrationPolicy = std::make_shared<migration::ScriptedPolicy>(
          [&sched, threshold, released, consolidate](
            const migration::PlacementView& view) {
              if (view.checkIndex < threshold) {
                  return std::vector<migration::Move>{};
              }
              auto adjusted = view;
              if (!*released) {
                  *released = true;
                  sched.release(0, 4, TENANT);
                  adjusted.freeCores[0] = sched.node(0).freeCores();
              }
              return consolidate->plan(adjusted);
          });
    }

    runtime::AppId app = rt.launch(program, std::move(opts));
    queue.runUntilIdle();
    rt.failStuckApps();
    const auto& r = rt.result(app);
    if (r.failed) {
        throw ContractViolation("migration scenario failed: " + r.error);
    }
    if (migrated != nullptr) {
        *migrated = r.granulesMigrated;
    }
    return r.end - r.start;
}

}

BenchProfile parseProfile(std::string_view text)
{
    if (text == "compute") {
        return BenchProfile::Compute;
    }
    if (text == "network") {
        return BenchProfile::Network;
    }
    throw ConfigError("unknown profile '" + std::string(text) + "'");
}

std::string_view toString(BenchProfile profile)
{
    return profile == BenchProfile::Compute ? "compute" : "network";
}

MigrationBenchReport runMigrationScenario(BenchProfile profile,
                                          std::optional<double> migrateAt)
{
    if (migrateAt && !(*migrateAt > 0.0 && *migrateAt < 1.0)) {
        throw ConfigError("migrate-at must lie strictly between 0 and 1");
    }
    MigrationBenchReport rep;
    rep.profile = profile;
    rep.migrateAt = migrateAt;
    rep.referenceTicks =
      runOnce(profile, Layout::Fragmented, std::nullopt, nullptr);
    rep.migratedTicks =
      migrateAt ? runOnce(profile,
                          Layout::Fragmented,
                          migrateAt,
                          &rep.granulesMigrated)
                : rep.referenceTicks;
    rep.colocatedTicks =
      runOnce(profile, Layout::Colocated, std::nullopt, nullptr);
    rep.speedup = static_cast<double>(rep.referenceTicks) /
                  static_cast<double>(rep.migratedTicks);
    rep.colocatedSpeedup = static_cast<double>(rep.referenceTicks) /
                           static_cast<double>(rep.colocatedTicks);
    return rep;
}

std::string migrationReportCsv(const MigrationBenchReport& r)
{
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(6);
    out << "profile,migrate_at,reference_ticks,migrated_ticks,"
           "colocated_ticks,speedup,colocated_speedup,granules_migrated\n";
    out << toString(r.profile) << ",";
    if (r.migrateAt) {
        out << *r.migrateAt;
    } else {
        out << "none";
    }
    out << "," << r.referenceTicks << "," << r.migratedTicks << ","
        << r.colocatedTicks << "," << r.speedup << "," << r.colocatedSpeedup
        << "," << r.granulesMigrated << "\n";
    return out.str();
}

}
