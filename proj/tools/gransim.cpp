#include <gransim/cluster/ClusterConfig.h>
#include <gransim/harness/Batch.h>
#include <gransim/harness/MigrationBench.h>
#include <gransim/harness/Trace.h>
#include <gransim/util/Errors.h>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace gransim;

namespace {

void writeText(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw IOError("cannot write " + path.string());
    }
}

}

int main(int argc, char** argv)
{
    CLI::App app{ "Granule runtime and cluster simulator" };
    app.require_subcommand(1);

    // gen-trace
    auto* gen = app.add_subcommand("gen-trace", "Generate a job trace");
    harness::TraceSpec spec;
    std::string genKind = "mpi";
    std::string genOut;
    gen->add_option("--count", spec.count, "Number of jobs")->required();
    gen->add_option("--kind", genKind, "mpi or omp")
      ->check(CLI::IsMember({ "mpi", "omp" }));
    gen->add_option("--min", spec.minParallelism, "Minimum parallelism")
      ->required();
    gen->add_option("--max", spec.maxParallelism, "Maximum parallelism")
      ->required();
    gen->add_option("--seed", spec.seed, "RNG seed");
    gen->add_option("--work-min", spec.minWork, "Minimum work units");
    gen->add_option("--work-max", spec.maxWork, "Maximum work units");
    gen->add_option("--out", genOut, "Output CSV")->required();

    // run
    auto* run = app.add_subcommand("run", "Run a trace in one mode");
    std::string traceFile, modeText = "granular", configFile, runOut;
    std::optional<int> nodes;
    std::optional<uint64_t> seed;
    bool noMigration = false;
    run->add_option("--trace", traceFile, "Trace CSV")->required();
    run->add_option("--mode", modeText, "granular|fixed-1|fixed-2|fixed-4|fixed-8");
    run->add_option("--nodes", nodes, "Node count (overrides config)");
    run->add_option("--config", configFile, "key=value cluster config");
    run->add_option("--seed", seed, "RNG seed override");
    run->add_flag("--no-migration", noMigration, "Disable consolidation");
    run->add_option("--out", runOut, "Output directory")->required();

    // migrate-bench
    auto* bench = app.add_subcommand("migrate-bench", "Migration scenario");
    std::string profileText = "network", benchOut;
    double migrateAt = 0.2;
    bench->add_option("--profile", profileText, "compute or network")
      ->check(CLI::IsMember({ "compute", "network" }));
    bench->add_option("--migrate-at", migrateAt, "Fraction of the run");
    bench->add_option("--out", benchOut, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            spec.kind = harness::parseJobKind(genKind);
            harness::writeTrace(harness::generateTrace(spec), genOut);
            std::cout << "wrote " << spec.count << " jobs to " << genOut
                      << "\n";
        } else if (run->parsed()) {
            cluster::ClusterConfig config;
            if (!configFile.empty()) {
                config = cluster::loadClusterConfig(configFile, config);
            }
            if (nodes) {
                config.nodeCount = *nodes;
            }
            if (seed) {
                config.rngSeed = *seed;
            }
            auto trace = harness::readTrace(traceFile);
            harness::BatchOptions opts;
            opts.programDir =
              std::filesystem::path(traceFile).parent_path().string();
            opts.migration = !noMigration;
            auto report = harness::runBatch(
              trace, harness::parseMode(modeText), config, opts);
            harness::emitMetrics(report, runOut);
            std::cout << report.mode << " makespan " << report.makespan
                      << " median idle "
                      << harness::medianIdleFraction(
                           report.idle, report.totalCores, report.makespan)
                      << " failed jobs " << report.failedJobs << "\n";
        } else if (bench->parsed()) {
            auto report = harness::runMigrationScenario(
              harness::parseProfile(profileText), migrateAt);
            std::filesystem::create_directories(benchOut);
            writeText(std::filesystem::path(benchOut) / "migration.csv",
                      harness::migrationReportCsv(report));
            std::cout << harness::migrationReportCsv(report);
        }
    } catch (const GransimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
