#ifndef DECOLAB_VERSION_HPP
#define DECOLAB_VERSION_HPP

namespace decolab {
inline constexpr const char* kVersion = "0.1.0";
}

#endif  // DECOLAB_VERSION_HPP
