#pragma once

#define CRITSCORE_VERSION "0.1.0"

namespace critscore {
inline const char* version() { return CRITSCORE_VERSION; }
}
