#pragma once

#include <iosfwd>
#include <string>

#include "relevagan/nn.hpp"

namespace relevagan::nn {

// Textual network dump, version-tagged. Values are written as C hex-float
// literals so a round trip is bit exact.
void save_network(const Network& net, std::ostream& out);
Network load_network(std::istream& in);

void save_network_file(const Network& net, const std::string& path);
Network load_network_file(const std::string& path);

}  // namespace relevagan::nn
