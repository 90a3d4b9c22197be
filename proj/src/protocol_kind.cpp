#include "fstl/protocol_kind.hpp"

#include <algorithm>
#include <cctype>

#include "fstl/error.hpp"

namespace fstl {

const char* protocol_name(ProtocolKind k) {
    switch (k) {
        case ProtocolKind::FL: return "FL";
        case ProtocolKind::SL: return "SL";
        case ProtocolKind::FSL: return "FSL";
        case ProtocolKind::FSTL: return "FSTL";
    }
    return "?";
}

ProtocolKind parse_protocol(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    for (auto k : kAllProtocols)
        if (upper == protocol_name(k)) return k;
    throw ConfigError("unknown protocol '" + std::string(name) + "' (expected FL, SL, FSL or FSTL)");
}

}  // namespace fstl
