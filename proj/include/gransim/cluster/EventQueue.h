#pragma once

#include <gransim/cluster/ClusterConfig.h>

#include <functional>
#include <queue>
#include <string>
#include <vector>

namespace gransim::cluster {

// Discrete-event loop. Events fire in (time, submission order); the clock
// only moves forward.
class EventQueue
{
  public:
    using Action = std::function<void()>;

    void submit(Tick delay, std::string tag, Action action);
    void submitAt(Tick time, std::string tag, Action action);

    // Processes events until none remain, returning the final clock
    Tick runUntilIdle();

    // Processes events with time <= limit
    Tick runUntil(Tick limit);

    Tick now() const { return clock; }
    bool empty() const { return pending.empty(); }
    uint64_t processed() const { return processedCount; }

    // FNV-1a over (time, tag) of every processed event
    uint64_t logHash() const { return hash; }

  private:
    struct Event
    {
        Tick time;
        uint64_t seq;
        std::string tag;
        Action action;
    };
    struct Later
    {
        bool operator()(const Event& a, const Event& b) const
        {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };

    void step();

    std::priority_queue<Event, std::vector<Event>, Later> pending;
    Tick clock = 0;
    uint64_t nextSeq = 0;
    uint64_t processedCount = 0;
    uint64_t hash = 1469598103934665603ULL;
};

}
