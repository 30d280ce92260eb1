#pragma once

#include <string>

#include <json.hpp>

#include "snnkit/conversion.hpp"
#include "snnkit/network.hpp"
#include "snnkit/snn.hpp"

namespace snnkit {

// Checkpoints are single JSON documents with a format_version field and
// parameter arrays as nested lists. Doubles survive the round trip
// bit-exactly; non-finite values are rejected at save time.

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

nlohmann::json snn_to_json(const SpikingNet& snn);
SpikingNet snn_from_json(const nlohmann::json& j);
void save_snn(const SpikingNet& snn, const std::string& path);
SpikingNet load_snn(const std::string& path);

nlohmann::json report_to_json(const ConversionReport& report);

}  // namespace snnkit
