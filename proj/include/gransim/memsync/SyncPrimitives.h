#pragma once

#include <gransim/guest/Granule.h>
#include <gransim/snapshot/Snapshot.h>

#include <deque>
#include <map>
#include <optional>
#include <vector>

namespace gransim::memsync {

using guest::GranuleId;

struct DistMutex
{
    int64_t id = 0;
    std::optional<GranuleId> holder;
    std::deque<GranuleId> waiters;
    // Ranges pushed by previous holders, handed to each new holder
    snapshot::RangeSet history;
};

// Distributed mutexes held on the app's main node. Grants are FIFO.
class MutexTable
{
  public:
    // True if granted now, false if queued. Throws ProtocolError if g already
    // holds it.
    bool lock(int64_t id, GranuleId g);

    // Releases and returns the next holder, if any. Throws ProtocolError if g
    // is not the holder.
    std::optional<GranuleId> unlock(int64_t id, GranuleId g);

    std::optional<GranuleId> holder(int64_t id) const;
    const DistMutex& get(int64_t id) const;
    DistMutex& get(int64_t id);
    bool exists(int64_t id) const { return mutexes.contains(id); }

  private:
    std::map<int64_t, DistMutex> mutexes;
};

struct DistLatch
{
    int64_t id = 0;
    int64_t counter = 0;
    std::vector<GranuleId> waiters;
};

class LatchTable
{
  public:
    // Throws ProtocolError if the latch exists or count < 0
    void create(int64_t id, int64_t count);

    // Non-blocking. Returns the waiters released if the counter hit zero.
    // Throws ProtocolError for unknown latches or a decrement below zero.
    std::vector<GranuleId> decrement(int64_t id);

    // True if the counter is already zero, otherwise g is queued
    bool wait(int64_t id, GranuleId g);

    int64_t counter(int64_t id) const;
    bool exists(int64_t id) const { return latches.contains(id); }

  private:
    DistLatch& get(int64_t id);
    std::map<int64_t, DistLatch> latches;
};

}
