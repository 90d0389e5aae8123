#include <gransim/harness/Programs.h>
#include <gransim/util/Errors.h>

#include <filesystem>
#include <sstream>

namespace gransim::harness {

namespace {

uint64_t perIterationWork(const ProgramParams& p)
{
    if (p.parallelism < 1 || p.iterations < 1) {
        throw ConfigError("program needs parallelism and iterations >= 1");
    }
    uint64_t perGranule = p.workUnits / static_cast<uint64_t>(p.parallelism);
    return std::max<uint64_t>(1, perGranule / p.iterations);
}

std::string allReduceLoop(const ProgramParams& p, uint64_t work)
{
    if (p.vectorBytes == 0 || p.vectorBytes % 8 != 0) {
        throw ConfigError("all-reduce vector must be a positive multiple of 8");
    }
    std::ostringstream s;
    s << "MEMORY " << p.memoryPages << "\n"
      << "    SETG 0 " << p.iterations << "\n"
      << "    FORK " << p.parallelism << " body\n"
      << "    EXIT\n"
      << "body:\n"
      << "    IDX 0\n"
      << "loop:\n"
      << "    WORK " << work << "\n"
      << "    ADD 8 i64 1\n"
      << "    ALLREDUCE 8 " << p.vectorBytes << " sum i64\n"
      << "    DJNZ 0 loop\n"
      << "    JOIN\n";
    return s.str();
}

}

std::string mpiComputeSource(const ProgramParams& params)
{
    return allReduceLoop(params, perIterationWork(params));
}

std::string mpiNetworkSource(const ProgramParams& params)
{
    return allReduceLoop(params, perIterationWork(params));
}

std::string ompDgemmSource(const ProgramParams& p)
{
    uint64_t work = perIterationWork(p);
    // Page 0 holds the shared counter, tiles start on page 1
    size_t tileBytes = 8;
    size_t pages = std::max<size_t>(
      p.memoryPages, 1 + (p.parallelism * tileBytes + 4095) / 4096);

    std::ostringstream s;
    s << "MEMORY " << pages << "\n"
      << "    REDUCE 0 8 sum i64\n"
      << "    SETG 0 " << p.iterations << "\n"
      << "    SPAWNT " << p.parallelism << " body\n"
      << "    EXIT\n"
      << "body:\n"
      << "loop:\n"
      << "    WORK " << work << "\n"
      << "    ADD 0 i64 1\n";
    for (int i = 0; i < p.parallelism; i++) {
        s << "    BRIDX " << i << " tile" << i << "\n";
    }
    s << "    JMP sync\n";
    for (int i = 0; i < p.parallelism; i++) {
        s << "tile" << i << ":\n"
          << "    ADD " << 4096 + i * tileBytes << " i64 1\n"
          << "    JMP sync\n";
    }
    s << "sync:\n"
      << "    BARRIER\n"
      << "    DJNZ 0 loop\n"
      << "    JOIN\n";
    return s.str();
}

guest::GuestProgram resolveProgram(const Job& job, const std::string& baseDir)
{
    constexpr std::string_view prefix = "builtin:";
    if (job.program.starts_with(prefix)) {
        std::string name = job.program.substr(prefix.size());
        ProgramParams p;
        p.parallelism = job.parallelism;
        p.workUnits = job.workUnits;
        if (name == "mpi-compute") {
            return guest::loadProgram(mpiComputeSource(p));
        }
        if (name == "mpi-network") {
            p.iterations = 50;
            p.vectorBytes = 64;
            return guest::loadProgram(mpiNetworkSource(p));
        }
        if (name == "omp-dgemm") {
            return guest::loadProgram(ompDgemmSource(p));
        }
        throw ConfigError("unknown builtin program '" + name + "'");
    }
    std::filesystem::path path(job.program);
    if (path.is_relative() && !baseDir.empty()) {
        path = std::filesystem::path(baseDir) / path;
    }
    return guest::loadProgramFile(path.string());
}

}
