#include <gransim/harness/Batch.h>
#include <gransim/harness/Programs.h>
#include <gransim/runtime/Runtime.h>
#include <gransim/util/Errors.h>

#include <algorithm>

namespace gransim::harness {

std::string BatchMode::name() const
{
    return granular ? "granular"
                    : "fixed-" + std::to_string(containersPerNode);
}

BatchMode parseMode(std::string_view text)
{
    if (text == "granular") {
        return { true, 1 };
    }
    for (int k : { 1, 2, 4, 8 }) {
        if (text == "fixed-" + std::to_string(k)) {
            return { false, k };
        }
    }
    throw ConfigError("unknown mode '" + std::string(text) + "'");
}

namespace {

using runtime::AppId;
using runtime::NodeId;

struct BatchRun
{
    const JobTrace& trace;
    BatchMode mode;
    BatchOptions options;
    cluster::ClusterConfig sim;
    int totalCores;

    cluster::EventQueue queue;
    cluster::Transport transport;
    scheduler::Scheduler scheduler;
    runtime::Runtime rt;

    std::vector<std::shared_ptr<const guest::GuestProgram>> programs;
    BatchReport report;
    size_t head = 0;

    BatchRun(const JobTrace& trace,
             const BatchMode& mode,
             const BatchOptions& options,
             const cluster::ClusterConfig& sim,
             int totalCores)
      : trace(trace)
      , mode(mode)
      , options(options)
      , sim(sim)
      , totalCores(totalCores)
      , transport(queue, this->sim)
      , scheduler(sim.nodeCount,
                  sim.coresPerNode,
                  scheduler::parsePolicy(sim.placementPolicy))
      , rt(queue, transport, this->sim, scheduler)
    {}

    int slotCores() const { return sim.coresPerNode; }

    // Containers (fixed mode) or cores (granular) a job needs
    int demand(const Job& job) const
    {
        if (mode.granular) {
            return job.parallelism;
        }
        if (job.kind == JobKind::Omp) {
            return 1;
        }
        return (job.parallelism + slotCores() - 1) / slotCores();
    }

    void recordIdle()
    {
        int idle = totalCores - rt.busyCores();
        Tick now = queue.now();
        auto& series = report.idle;
        if (!series.empty() && series.back().tick == now) {
            series.back().idleCores = idle;
            if (series.size() >= 2 &&
                series[series.size() - 2].idleCores == idle) {
                series.pop_back();
            }
            return;
        }
        if (series.empty() || series.back().idleCores != idle) {
            series.push_back({ now, idle });
        }
    }

    bool tryStart(size_t index)
    {
        const Job& job = trace[index];
        runtime::LaunchOptions opts;
        std::vector<NodeId> containers;

        if (mode.granular) {
            if (scheduler.totalFree() < job.parallelism) {
                return false;
            }
            opts.appId = rt.allocateAppId();
            NodeId origin = scheduler.mostAvailable();
            for (const auto& nc : scheduler.placeAndReserve(
                   opts.appId, origin, job.parallelism)) {
                opts.pool.insert(opts.pool.end(), nc.count, nc.node);
            }
            opts.origin = opts.pool.front();
            opts.manageCores = true;
            if (options.migration) {
                opts.migrationPolicy =
                  std::make_shared<migration::ConsolidationPolicy>();
            }
        } else {
            int need = demand(job);
            for (const auto& n : scheduler.allNodes()) {
                if (static_cast<int>(containers.size()) == need) {
                    break;
                }
                if (n.coresUsed() == 0) {
                    containers.push_back(n.nodeId());
                }
            }
            if (static_cast<int>(containers.size()) < need) {
                return false;
            }
            opts.appId = rt.allocateAppId();
            for (NodeId c : containers) {
                scheduler.reserve(c, slotCores(), opts.appId);
            }
            for (int i = 0; i < job.parallelism; i++) {
                opts.pool.push_back(job.kind == JobKind::Omp
                                      ? containers.front()
                                      : containers[i / slotCores()]);
            }
            opts.origin = opts.pool.front();
            opts.manageCores = false;
        }

        report.jobs[index].start = queue.now();
        AppId app = opts.appId;
        rt.launch(
          programs[index],
          std::move(opts),
          [this, index, containers, app](const runtime::AppResult& r) {
              auto& rec = report.jobs[index];
              rec.end = r.end;
              rec.computeTicks = r.computeTicks;
              rec.failed = r.failed;
              report.migrations += r.migrationsCommitted;
              for (NodeId c : containers) {
                  scheduler.release(c, slotCores(), app);
              }
              recordIdle();
              queue.submit(0, "admit", [this]() { admit(); });
          });
        recordIdle();
        return true;
    }

    void admit()
    {
        while (head < trace.size()) {
            if (trace[head].arrival > queue.now()) {
                return;
            }
            if (!tryStart(head)) {
                return;
            }
            head++;
        }
    }

    BatchReport run()
    {
        int capacity = mode.granular ? totalCores : sim.nodeCount;
        for (const auto& job : trace) {
            if (demand(job) > capacity) {
                throw ConfigError("job " + std::to_string(job.id) +
                                  " needs more than the whole cluster");
            }
            programs.push_back(std::make_shared<guest::GuestProgram>(
              resolveProgram(job, options.programDir)));
        }
        report.mode = mode.name();
        report.totalCores = totalCores;
        for (const auto& job : trace) {
            report.jobs.push_back({ job.id, 0, 0, 0, false });
        }
        report.idle.push_back({ 0, totalCores });
        rt.setCoreListener([this]() { recordIdle(); });

        std::vector<Tick> arrivals;
        for (const auto& job : trace) {
            if (job.arrival > 0) {
                arrivals.push_back(job.arrival);
            }
        }
        std::sort(arrivals.begin(), arrivals.end());
        arrivals.erase(std::unique(arrivals.begin(), arrivals.end()),
                       arrivals.end());
        for (Tick t : arrivals) {
            queue.submitAt(t, "arrival", [this]() { admit(); });
        }
        admit();
        queue.runUntilIdle();
        rt.failStuckApps();

        for (const auto& rec : report.jobs) {
            report.makespan = std::max(report.makespan, rec.end);
            report.computeCoreTicks += rec.computeTicks;
            report.failedJobs += rec.failed ? 1 : 0;
        }
        std::erase_if(report.idle, [this](const IdleSample& s) {
            return s.tick > report.makespan;
        });
        report.occupiedCoreTicks =
          static_cast<uint64_t>(totalCores) * report.makespan -
          idleCoreTicks(report.idle, report.makespan);
        return std::move(report);
    }
};

}

BatchReport runBatch(const JobTrace& trace,
                     const BatchMode& mode,
                     const cluster::ClusterConfig& config,
                     const BatchOptions& options)
{
    config.validate();
    cluster::ClusterConfig sim = config;
    if (!mode.granular) {
        int k = mode.containersPerNode;
        if (k < 1 || config.coresPerNode % k != 0) {
            throw ConfigError("cannot split " +
                              std::to_string(config.coresPerNode) +
                              " cores into " + std::to_string(k) +
                              " containers");
        }
        sim.nodeCount = config.nodeCount * k;
        sim.coresPerNode = config.coresPerNode / k;
    }
    BatchRun run(
      trace, mode, options, sim, config.nodeCount * config.coresPerNode);
    return run.run();
}

namespace {

// (value, weight) segments of the idle series clipped to [0, makespan)
std::vector<std::pair<int, Tick>> idleSegments(
  const std::vector<IdleSample>& idle,
  Tick makespan)
{
    std::vector<std::pair<int, Tick>> out;
    for (size_t i = 0; i < idle.size(); i++) {
        Tick start = std::min(idle[i].tick, makespan);
        Tick end = i + 1 < idle.size() ? idle[i + 1].tick : makespan;
        end = std::min(end, makespan);
        if (end > start) {
            out.emplace_back(idle[i].idleCores, end - start);
        }
    }
    return out;
}

}

double medianIdleFraction(const std::vector<IdleSample>& idle,
                          int totalCores,
                          Tick makespan)
{
    if (totalCores <= 0) {
        throw ConfigError("cluster without cores");
    }
    auto segs = idleSegments(idle, makespan);
    if (segs.empty()) {
        return idle.empty() ? 1.0
                            : static_cast<double>(idle.front().idleCores) /
                                totalCores;
    }
    std::sort(segs.begin(), segs.end());
    Tick total = 0;
    for (const auto& [v, w] : segs) {
        total += w;
    }
    Tick acc = 0;
    for (const auto& [v, w] : segs) {
        acc += w;
        if (2 * acc >= total) {
            return static_cast<double>(v) / totalCores;
        }
    }
    return static_cast<double>(segs.back().first) / totalCores;
}

uint64_t idleCoreTicks(const std::vector<IdleSample>& idle, Tick makespan)
{
    uint64_t sum = 0;
    for (const auto& [v, w] : idleSegments(idle, makespan)) {
        sum += static_cast<uint64_t>(v) * w;
    }
    return sum;
}

}
