#ifndef MOLBO_VERSION_HPP
#define MOLBO_VERSION_HPP

namespace molbo {

inline constexpr const char* kVersion = "0.1.0";

} // namespace molbo

#endif
