#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpsqkd/params.hpp"
#include "dpsqkd/sift.hpp"

namespace dpsqkd {

// Ordered reliable byte stream between the two endpoints.
class ByteStream {
  public:
    virtual ~ByteStream() = default;
    // Reads up to `size` bytes; returns 0 only on orderly close.
    virtual size_t read_some(uint8_t* data, size_t size) = 0;
    virtual void write_all(const uint8_t* data, size_t size) = 0;
};

// In-memory duplex pair for tests and in-process sessions.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_loopback_pair();

// fd-backed stream (socketpair / TCP); takes ownership of the descriptor.
std::unique_ptr<ByteStream> make_fd_stream(int fd);

// Blocking TCP helpers; addr is "host:port".
std::unique_ptr<ByteStream> tcp_listen_accept(const std::string& addr);
std::unique_ptr<ByteStream> tcp_connect(const std::string& addr, int retries = 50);

class ProtocolError : public std::runtime_error {
  public:
    enum class Code { ProtocolOrderViolation, VersionMismatch, TransportClosed };
    ProtocolError(Code code, std::string what) : std::runtime_error(std::move(what)), code_(code) {}
    Code code() const { return code_; }

  private:
    Code code_;
};

enum class Role { alice, bob };

struct SessionMode {
    bool sampled = false;
    uint32_t sample_size = 0;  // only in sampled mode

    static SessionMode full() { return {false, 0}; }
    static SessionMode sample(uint32_t k) { return {true, k}; }
};

struct LoggedFrame {
    bool outgoing = false;
    std::vector<uint8_t> bytes;

    bool operator==(const LoggedFrame&) const = default;
};

struct SessionResult {
    SiftedKey key;           // final key (sampled positions removed in sampled mode)
    uint32_t errors = 0;     // from the comparison round
    uint32_t compared = 0;
    double qber_estimate = 0.0;
    std::vector<LoggedFrame> log;
};

// Runs one end of the classical post-processing protocol. Both endpoints
// must share params, slot count and seed; the shared seed reproduces the
// same quantum-channel realization on both sides, standing in for the
// physical link. Message order: Hello -> Disclose -> (SampleRequest ->
// SampleBits)* -> QberReport -> Done, all Bob-initiated except SampleBits.
SessionResult run_session(ByteStream& transport, Role role, const SystemParams& params, uint64_t slot_count,
                          uint64_t seed, SessionMode mode, int workers = 1);

}  // namespace dpsqkd
