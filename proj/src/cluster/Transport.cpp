#include <gransim/cluster/Transport.h>

#include <algorithm>

namespace gransim::cluster {

Transport::Transport(EventQueue& queue, const ClusterConfig& config)
  : queue(queue)
  , config(config)
{}

Tick Transport::latency(NodeId src, NodeId dst) const
{
    return src == dst ? config.intraNodeLatency : config.crossNodeLatency;
}

Tick Transport::send(NodeId src,
                     NodeId dst,
                     size_t bytes,
                     const std::string& tag,
                     std::function<void()> onDeliver,
                     Tick extraDelay)
{
    counters.messages++;
    counters.bytes += bytes;
    if (src == dst) {
        counters.intraNodeMessages++;
    } else {
        counters.crossNodeMessages++;
        counters.crossNodeBytes += bytes;
        counters.crossNodeByTag[tag]++;
    }

    // A slow transfer must not be overtaken on its channel
    Tick& last = lastArrival[{ src, dst }];
    Tick arrival =
      std::max(queue.now() + latency(src, dst) + extraDelay, last);
    last = arrival;
    queue.submitAt(arrival, tag, std::move(onDeliver));
    return arrival;
}

}
