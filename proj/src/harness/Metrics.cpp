#include <gransim/harness/Batch.h>
#include <gransim/util/Errors.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace gransim::harness {

std::string makespanCsv(const BatchReport& report)
{
    std::ostringstream out;
    out << "mode,ticks\n" << report.mode << "," << report.makespan << "\n";
    return out.str();
}

std::string idleCsv(const BatchReport& report)
{
    std::ostringstream out;
    out << "tick,idle_cores\n";
    for (const auto& s : report.idle) {
        out << s.tick << "," << s.idleCores << "\n";
    }
    return out.str();
}

std::string execCsv(const BatchReport& report)
{
    std::ostringstream out;
    out << "job_id,start,end\n";
    for (const auto& j : report.jobs) {
        out << j.jobId << "," << j.start << "," << j.end << "\n";
    }
    return out.str();
}

namespace {

void writeFile(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IOError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IOError("failed writing " + path.string());
    }
}

}

void emitMetrics(const BatchReport& report, const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IOError("cannot create " + dir + ": " + ec.message());
    }
    std::filesystem::path base(dir);
    writeFile(base / "makespan.csv", makespanCsv(report));
    writeFile(base / "idle.csv", idleCsv(report));
    writeFile(base / "exec.csv", execCsv(report));
}

}
