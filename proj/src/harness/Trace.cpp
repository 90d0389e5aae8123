#include <gransim/harness/Trace.h>
#include <gransim/util/Errors.h>

#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

namespace gransim::harness {

namespace {

const char* const HEADER = "job_id,kind,parallelism,program,work_units,arrival";

std::vector<std::string_view> splitFields(std::string_view line)
{
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

uint64_t parseUnsigned(std::string_view text, size_t line, const char* what)
{
    uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParseError("line " + std::to_string(line) + ": bad " + what +
                         " '" + std::string(text) + "'");
    }
    return v;
}

}

std::string_view toString(JobKind kind)
{
    return kind == JobKind::Mpi ? "mpi" : "omp";
}

JobKind parseJobKind(std::string_view text)
{
    if (text == "mpi") {
        return JobKind::Mpi;
    }
    if (text == "omp") {
        return JobKind::Omp;
    }
    throw ConfigError("unknown job kind '" + std::string(text) + "'");
}

JobTrace generateTrace(const TraceSpec& spec)
{
    if (spec.minParallelism < 1 || spec.maxParallelism < spec.minParallelism) {
        throw ConfigError("empty parallelism range");
    }
    if (spec.maxWork < spec.minWork) {
        throw ConfigError("empty work range");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> par(spec.minParallelism,
                                           spec.maxParallelism);
    std::uniform_int_distribution<uint64_t> work(spec.minWork, spec.maxWork);

    JobTrace trace;
    for (size_t i = 0; i < spec.count; i++) {
        Job j;
        j.id = i;
        j.kind = spec.kind;
        j.parallelism = par(rng);
        j.workUnits = work(rng);
        j.program = spec.kind == JobKind::Mpi ? "builtin:mpi-compute"
                                              : "builtin:omp-dgemm";
        j.arrival = 0;
        trace.push_back(std::move(j));
    }
    return trace;
}

std::string traceToCsv(const JobTrace& trace)
{
    std::ostringstream out;
    out << HEADER << "\n";
    for (const auto& j : trace) {
        out << j.id << "," << toString(j.kind) << "," << j.parallelism << ","
            << j.program << "," << j.workUnits << "," << j.arrival << "\n";
    }
    return out.str();
}

JobTrace traceFromCsv(std::string_view text)
{
    JobTrace trace;
    size_t lineNo = 0;
    bool sawHeader = false;
    while (!text.empty()) {
        size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{}
                                            : text.substr(nl + 1);
        lineNo++;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        if (!sawHeader) {
            if (line != HEADER) {
                throw ParseError("line 1: expected header '" +
                                 std::string(HEADER) + "'");
            }
            sawHeader = true;
            continue;
        }
        auto f = splitFields(line);
        if (f.size() != 6) {
            throw ParseError("line " + std::to_string(lineNo) +
                             ": expected 6 fields, got " +
                             std::to_string(f.size()));
        }
        Job j;
        j.id = parseUnsigned(f[0], lineNo, "job_id");
        try {
            j.kind = parseJobKind(f[1]);
        } catch (const ConfigError&) {
            throw ParseError("line " + std::to_string(lineNo) +
                             ": bad kind '" + std::string(f[1]) + "'");
        }
        j.parallelism =
          static_cast<int>(parseUnsigned(f[2], lineNo, "parallelism"));
        if (j.parallelism < 1) {
            throw ParseError("line " + std::to_string(lineNo) +
                             ": parallelism must be at least 1");
        }
        j.program = std::string(f[3]);
        if (j.program.empty()) {
            throw ParseError("line " + std::to_string(lineNo) +
                             ": empty program");
        }
        j.workUnits = parseUnsigned(f[4], lineNo, "work_units");
        j.arrival = parseUnsigned(f[5], lineNo, "arrival");
        trace.push_back(std::move(j));
    }
    if (!sawHeader) {
        throw ParseError("line 1: missing header");
    }
    return trace;
}

void writeTrace(const JobTrace& trace, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IOError("cannot write " + path);
    }
    out << traceToCsv(trace);
    if (!out) {
        throw IOError("failed writing " + path);
    }
}

JobTrace readTrace(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IOError("cannot read " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return traceFromCsv(buf.str());
}

}
