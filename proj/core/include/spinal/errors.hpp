#pragma once

#include <stdexcept>
#include <string>

namespace spinal {

/// Peer sent something the state machine cannot accept (bad frame type,
/// misaligned deltas, parameter mismatch). Sessions abort on this.
struct protocol_error : std::runtime_error {
    explicit protocol_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raw-data budget exhausted; the current block cannot continue.
struct resource_exhausted : std::runtime_error {
    explicit resource_exhausted(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / socket failure, with path or endpoint context in the message.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spinal
