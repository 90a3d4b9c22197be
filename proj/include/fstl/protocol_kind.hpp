#pragma once

#include <array>
#include <string>
#include <string_view>

namespace fstl {

enum class ProtocolKind { FL, SL, FSL, FSTL };

inline constexpr std::array<ProtocolKind, 4> kAllProtocols{ProtocolKind::FL, ProtocolKind::SL, ProtocolKind::FSL,
                                                           ProtocolKind::FSTL};

const char* protocol_name(ProtocolKind k);
/// Case-insensitive; throws ConfigError for unknown names.
ProtocolKind parse_protocol(std::string_view name);

inline bool is_split_protocol(ProtocolKind k) { return k != ProtocolKind::FL; }

}  // namespace fstl
