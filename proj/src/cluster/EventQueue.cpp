#include <gransim/cluster/EventQueue.h>
#include <gransim/util/Errors.h>

namespace gransim::cluster {

namespace {

void fnvMix(uint64_t& h, const void* data, size_t len)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; i++) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
}

}

void EventQueue::submit(Tick delay, std::string tag, Action action)
{
    submitAt(clock + delay, std::move(tag), std::move(action));
}

void EventQueue::submitAt(Tick time, std::string tag, Action action)
{
    if (time < clock) {
        throw ContractViolation("event scheduled in the past");
    }
    pending.push(Event{ time, nextSeq++, std::move(tag), std::move(action) });
}

void EventQueue::step()
{
    // priority_queue::top is const, so copy out before popping
    Event ev = pending.top();
    pending.pop();
    clock = ev.time;
    processedCount++;
    fnvMix(hash, &ev.time, sizeof(ev.time));
    fnvMix(hash, ev.tag.data(), ev.tag.size());
    ev.action();
}

Tick EventQueue::runUntilIdle()
{
    while (!pending.empty()) {
        step();
    }
    return clock;
}

Tick EventQueue::runUntil(Tick limit)
{
    while (!pending.empty() && pending.top().time <= limit) {
        step();
    }
    return clock;
}

}
