#ifndef MTSCALE_VERSION_HPP
#define MTSCALE_VERSION_HPP

namespace mtscale {
inline constexpr const char* kVersion = "0.1.0";
}

#endif  // MTSCALE_VERSION_HPP
