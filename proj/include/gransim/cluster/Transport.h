#pragma once

#include <gransim/cluster/EventQueue.h>

#include <functional>
#include <map>
#include <string>

namespace gransim::cluster {

using NodeId = int;

struct TransportStats
{
    uint64_t messages = 0;
    uint64_t intraNodeMessages = 0;
    uint64_t crossNodeMessages = 0;
    uint64_t bytes = 0;
    uint64_t crossNodeBytes = 0;
    // Cross-node message count per tag
    std::map<std::string, uint64_t> crossNodeByTag;
};

// Reliable transport, FIFO per directed (src, dst) channel
class Transport
{
  public:
    Transport(EventQueue& queue, const ClusterConfig& config);

    Tick latency(NodeId src, NodeId dst) const;

    // Delivers after the channel latency plus extraDelay. Returns the
    // delivery time.
    Tick send(NodeId src,
              NodeId dst,
              size_t bytes,
              const std::string& tag,
              std::function<void()> onDeliver,
              Tick extraDelay = 0);

    const TransportStats& stats() const { return counters; }
    void resetStats() { counters = {}; }

  private:
    EventQueue& queue;
    const ClusterConfig& config;
    TransportStats counters;
    std::map<std::pair<NodeId, NodeId>, Tick> lastArrival;
};

}
