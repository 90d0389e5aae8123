#include <catch_amalgamated.hpp>

#include "common/Gen.h"

#include <gransim/harness/Batch.h>
#include <gransim/harness/MigrationBench.h>
#include <gransim/harness/Programs.h>
#include <gransim/runtime/Runtime.h>
#include <gransim/util/Errors.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace gransim;
using namespace gransim::harness;
using gransim::test::Gen;

namespace {

cluster::ClusterConfig smallCluster(int nodes = 2)
{
    cluster::ClusterConfig config;
    config.nodeCount = nodes;
    config.coresPerNode = 8;
    return config;
}

JobTrace smallTrace(uint64_t seed, size_t count = 12)
{
    TraceSpec spec;
    spec.count = count;
    spec.seed = seed;
    spec.minParallelism = 2;
    spec.maxParallelism = 8;
    spec.minWork = 2000;
    spec.maxWork = 8000;
    return generateTrace(spec);
}

// Median of the per-tick idle fraction, expanding every tick
double bruteMedian(const std::vector<IdleSample>& idle, int cores, Tick end)
{
    std::vector<int> perTick;
    for (size_t i = 0; i < idle.size(); i++) {
        Tick from = idle[i].tick;
        Tick to = i + 1 < idle.size() ? idle[i + 1].tick : end;
        for (Tick t = from; t < std::min(to, end); t++) {
            perTick.push_back(idle[i].idleCores);
        }
    }
    std::sort(perTick.begin(), perTick.end());
    return static_cast<double>(perTick[(perTick.size() - 1) / 2]) / cores;
}

}

TEST_CASE("Traces are seeded and within bounds", "[harness]")
{
    auto a = smallTrace(5, 200);
    auto b = smallTrace(5, 200);
    auto c = smallTrace(6, 200);
    REQUIRE(a == b);
    REQUIRE(a != c);
    REQUIRE(a.size() == 200);
    std::set<int> seen;
    for (size_t i = 0; i < a.size(); i++) {
        REQUIRE(a[i].id == i);
        REQUIRE(a[i].parallelism >= 2);
        REQUIRE(a[i].parallelism <= 8);
        REQUIRE(a[i].workUnits >= 2000);
        REQUIRE(a[i].workUnits <= 8000);
        REQUIRE(a[i].arrival == 0);
        REQUIRE(a[i].program == "builtin:mpi-compute");
        seen.insert(a[i].parallelism);
    }
    REQUIRE(seen.size() == 7);

    TraceSpec omp;
    omp.kind = JobKind::Omp;
    omp.count = 3;
    REQUIRE(generateTrace(omp).front().program == "builtin:omp-dgemm");

    TraceSpec bad;
    bad.minParallelism = 5;
    bad.maxParallelism = 4;
    REQUIRE_THROWS_AS(generateTrace(bad), ConfigError);
}

TEST_CASE("Trace CSV round-trips", "[harness]")
{
    auto trace = smallTrace(9, 30);
    auto csv = traceToCsv(trace);
    REQUIRE(csv.starts_with("job_id,kind,parallelism,program,work_units,arrival\n"));
    REQUIRE(traceFromCsv(csv) == trace);

    auto path = std::filesystem::temp_directory_path() / "gransim_trace.csv";
    writeTrace(trace, path.string());
    REQUIRE(readTrace(path.string()) == trace);
    std::filesystem::remove(path);

    REQUIRE_THROWS_AS(readTrace("/nonexistent/trace.csv"), IOError);
    REQUIRE_THROWS_AS(
      traceFromCsv("job_id,kind,parallelism,program,work_units,arrival\n"
                   "0,mpi,x,builtin:mpi-compute,10,0\n"),
      ParseError);
    REQUIRE_THROWS_AS(
      traceFromCsv("job_id,kind,parallelism,program,work_units,arrival\n"
                   "0,gpu,4,builtin:mpi-compute,10,0\n"),
      GransimError);
    REQUIRE_THROWS_AS(traceFromCsv("id,kind\n"), ParseError);
}

TEST_CASE("Batch modes parse", "[harness]")
{
    REQUIRE(parseMode("granular").granular);
    REQUIRE(parseMode("fixed-4") == BatchMode{ false, 4 });
    REQUIRE(parseMode("fixed-4").name() == "fixed-4");
    REQUIRE_THROWS_AS(parseMode("fixed-3"), ConfigError);
    REQUIRE_THROWS_AS(parseMode("elastic"), ConfigError);
}

TEST_CASE("Builtin programs compute what they claim", "[harness]")
{
    ProgramParams p;
    p.parallelism = 4;
    p.workUnits = 4000;
    auto prog = guest::loadProgram(mpiComputeSource(p));
    cluster::ClusterConfig config = smallCluster(1);
    auto r = runtime::runProgram(prog, config);
    REQUIRE(r.finished);
    // Each granule adds 1 and all-reduces, ten times: x <- 4 (x + 1)
    int64_t x = 0;
    for (int i = 0; i < 10; i++) {
        x = 4 * (x + 1);
    }
    REQUIRE(loadAs<int64_t>(r.finalMemories.at(1), 8) == x);

    auto omp = guest::loadProgram(ompDgemmSource(p));
    auto ro = runtime::runProgram(omp, config);
    REQUIRE(ro.finished);
    REQUIRE(loadAs<int64_t>(ro.finalMemories.at(0), 0) == 40);
    for (int i = 0; i < 4; i++) {
        REQUIRE(loadAs<int64_t>(ro.finalMemories.at(0), 4096 + 8 * i) == 10);
    }

    Job job;
    job.program = "builtin:nope";
    REQUIRE_THROWS_AS(resolveProgram(job, ""), ConfigError);
}

TEST_CASE("Fixed containers need whole slices", "[harness]")
{
    auto config = smallCluster(1);
    Job job;
    job.parallelism = 5;
    job.workUnits = 1000;
    job.program = "builtin:mpi-compute";

    // Four 2-core containers: five granules take three of them
    auto r = runBatch({ job }, parseMode("fixed-4"), config);
    REQUIRE(r.failedJobs == 0);
    REQUIRE(r.jobs.size() == 1);

    job.parallelism = 9;
    REQUIRE_THROWS_AS(runBatch({ job }, parseMode("fixed-4"), config),
                      ConfigError);
    REQUIRE_THROWS_AS(runBatch({ job }, parseMode("granular"), config),
                      ConfigError);
}

TEST_CASE("Batch metrics close", "[harness]")
{
    auto config = smallCluster();
    auto trace = smallTrace(3);
    uint64_t compute = 0;
    for (const auto& modeName : { "granular", "fixed-1", "fixed-2", "fixed-8" }) {
        auto report = runBatch(trace, parseMode(modeName), config);
        REQUIRE(report.failedJobs == 0);
        REQUIRE(report.jobs.size() == trace.size());
        REQUIRE(report.totalCores == 16);

        uint64_t idle = idleCoreTicks(report.idle, report.makespan);
        REQUIRE(idle + report.occupiedCoreTicks ==
                static_cast<uint64_t>(report.totalCores) * report.makespan);
        REQUIRE(report.computeCoreTicks <= report.occupiedCoreTicks);
        if (compute == 0) {
            compute = report.computeCoreTicks;
        }
        REQUIRE(report.computeCoreTicks == compute);

        Tick lastEnd = 0;
        for (const auto& j : report.jobs) {
            REQUIRE(j.end > j.start);
            lastEnd = std::max(lastEnd, j.end);
        }
        REQUIRE(report.makespan == lastEnd);
        // FIFO: start times never decrease along the trace
        for (size_t i = 1; i < report.jobs.size(); i++) {
            REQUIRE(report.jobs[i].start >= report.jobs[i - 1].start);
        }
        for (const auto& s : report.idle) {
            REQUIRE(s.idleCores >= 0);
            REQUIRE(s.idleCores <= report.totalCores);
        }
    }
}

TEST_CASE("Median idle matches a per-tick recount of idle.csv", "[harness]")
{
    auto config = smallCluster();
    auto report = runBatch(smallTrace(4), parseMode("granular"), config);

    // Parse the emitted CSV back rather than reusing the in-memory samples
    std::istringstream in(idleCsv(report));
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "tick,idle_cores");
    std::vector<IdleSample> parsed;
    while (std::getline(in, line)) {
        auto comma = line.find(',');
        parsed.push_back({ std::stoull(line.substr(0, comma)),
                           std::stoi(line.substr(comma + 1)) });
    }
    REQUIRE(parsed == report.idle);
    REQUIRE(medianIdleFraction(report.idle, report.totalCores, report.makespan) ==
            bruteMedian(parsed, report.totalCores, report.makespan));

    // Property over synthetic step functions
    Gen gen(10);
    for (int round = 0; round < 100; round++) {
        std::vector<IdleSample> samples;
        Tick t = 0;
        int n = static_cast<int>(gen.intIn(1, 20));
        for (int i = 0; i < n; i++) {
            samples.push_back({ t, static_cast<int>(gen.intIn(0, 16)) });
            t += gen.intIn(1, 40);
        }
        REQUIRE(medianIdleFraction(samples, 16, t) == bruteMedian(samples, 16, t));
    }
}

TEST_CASE("Metric CSVs have documented headers", "[harness]")
{
    auto report = runBatch(smallTrace(2, 4), parseMode("fixed-2"), smallCluster());
    REQUIRE(makespanCsv(report) ==
            "mode,ticks\nfixed-2," + std::to_string(report.makespan) + "\n");
    REQUIRE(execCsv(report).starts_with("job_id,start,end\n"));

    auto dir = std::filesystem::temp_directory_path() / "gransim_metrics";
    std::filesystem::remove_all(dir);
    emitMetrics(report, dir.string());
    for (const char* name : { "makespan.csv", "idle.csv", "exec.csv" }) {
        REQUIRE(std::filesystem::exists(dir / name));
    }
    std::ifstream exec(dir / "exec.csv");
    std::stringstream text;
    text << exec.rdbuf();
    REQUIRE(text.str() == execCsv(report));
    std::filesystem::remove_all(dir);
}

TEST_CASE("Empty trace yields an empty report", "[harness]")
{
    auto report = runBatch({}, parseMode("granular"), smallCluster());
    REQUIRE(report.makespan == 0);
    REQUIRE(report.jobs.empty());
    REQUIRE(execCsv(report) == "job_id,start,end\n");
}

TEST_CASE("Migration scenario validates its trigger", "[harness]")
{
    REQUIRE_THROWS_AS(runMigrationScenario(BenchProfile::Network, 0.0),
                      ConfigError);
    REQUIRE_THROWS_AS(runMigrationScenario(BenchProfile::Network, 1.0),
                      ConfigError);
    REQUIRE(parseProfile("network") == BenchProfile::Network);
    REQUIRE_THROWS_AS(parseProfile("disk"), ConfigError);

    auto r = runMigrationScenario(BenchProfile::Network, 0.5);
    REQUIRE(r.granulesMigrated == 4);
    REQUIRE(r.speedup > 1.0);
    REQUIRE(r.colocatedTicks < r.migratedTicks);
    REQUIRE(migrationReportCsv(r).find("network") != std::string::npos);
}
