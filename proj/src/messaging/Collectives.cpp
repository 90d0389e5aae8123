#include <gransim/messaging/GranuleGroup.h>
#include <gransim/util/Errors.h>

namespace gransim::messaging {

Bytes foldContributions(const snapshot::MergeOp& op,
                        const std::vector<Bytes>& orderedContributions)
{
    if (orderedContributions.empty()) {
        throw ContractViolation("reduction with no contributions");
    }
    Bytes acc = orderedContributions.front();
    for (size_t i = 1; i < orderedContributions.size(); i++) {
        snapshot::foldBytes(op, acc, orderedContributions[i]);
    }
    return acc;
}

}
