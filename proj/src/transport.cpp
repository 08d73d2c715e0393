#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "dpsqkd/session.hpp"

namespace dpsqkd {

namespace {

struct LoopbackChannel {
    std::mutex m;
    std::condition_variable cv;
    std::deque<uint8_t> buf;
    bool closed = false;
};

class LoopbackStream : public ByteStream {
  public:
    LoopbackStream(std::shared_ptr<LoopbackChannel> rx, std::shared_ptr<LoopbackChannel> tx)
        : rx_(std::move(rx)), tx_(std::move(tx)) {}

    ~LoopbackStream() override {
        std::lock_guard<std::mutex> lock(tx_->m);
        tx_->closed = true;
        tx_->cv.notify_all();
    }

    size_t read_some(uint8_t* data, size_t size) override {
        std::unique_lock<std::mutex> lock(rx_->m);
        rx_->cv.wait(lock, [&] { return !rx_->buf.empty() || rx_->closed; });
        size_t n = 0;
        while (n < size && !rx_->buf.empty()) {
            data[n++] = rx_->buf.front();
            rx_->buf.pop_front();
        }
        return n;
    }

    void write_all(const uint8_t* data, size_t size) override {
        std::lock_guard<std::mutex> lock(tx_->m);
        if (tx_->closed) throw ProtocolError(ProtocolError::Code::TransportClosed, "peer closed loopback");
        tx_->buf.insert(tx_->buf.end(), data, data + size);
        tx_->cv.notify_all();
    }

  private:
    std::shared_ptr<LoopbackChannel> rx_;
    std::shared_ptr<LoopbackChannel> tx_;
};

class FdStream : public ByteStream {
  public:
    explicit FdStream(int fd) : fd_(fd) {}
    ~FdStream() override {
        if (fd_ >= 0) ::close(fd_);
    }

    size_t read_some(uint8_t* data, size_t size) override {
        for (;;) {
            ssize_t n = ::read(fd_, data, size);
            if (n >= 0) return size_t(n);
            if (errno == EINTR) continue;
            throw ProtocolError(ProtocolError::Code::TransportClosed,
                                std::string("read failed: ") + std::strerror(errno));
        }
    }

    void write_all(const uint8_t* data, size_t size) override {
        size_t off = 0;
        while (off < size) {
            ssize_t n = ::write(fd_, data + off, size - off);
            if (n > 0) {
                off += size_t(n);
                continue;
            }
            if (n < 0 && errno == EINTR) continue;
            throw ProtocolError(ProtocolError::Code::TransportClosed,
                                std::string("write failed: ") + std::strerror(errno));
        }
    }

  private:
    int fd_;
};

sockaddr_in parse_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) {
        throw ProtocolError(ProtocolError::Code::TransportClosed, "address must be host:port");
    }
    const std::string host = addr.substr(0, colon);
    const int port = std::stoi(addr.substr(colon + 1));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(uint16_t(port));
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
        throw ProtocolError(ProtocolError::Code::TransportClosed, "bad host address " + host);
    }
    return sa;
}

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_loopback_pair() {
    auto a2b = std::make_shared<LoopbackChannel>();
    auto b2a = std::make_shared<LoopbackChannel>();
    return {std::make_unique<LoopbackStream>(b2a, a2b), std::make_unique<LoopbackStream>(a2b, b2a)};
}

std::unique_ptr<ByteStream> make_fd_stream(int fd) { return std::make_unique<FdStream>(fd); }

std::unique_ptr<ByteStream> tcp_listen_accept(const std::string& addr) {
    sockaddr_in sa = parse_addr(addr);
    int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) throw ProtocolError(ProtocolError::Code::TransportClosed, "socket() failed");
    int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(listener, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
        ::close(listener);
        throw ProtocolError(ProtocolError::Code::TransportClosed,
                            std::string("bind failed: ") + std::strerror(errno));
    }
    if (::listen(listener, 1) != 0) {
        ::close(listener);
        throw ProtocolError(ProtocolError::Code::TransportClosed, "listen failed");
    }
    int fd = ::accept(listener, nullptr, nullptr);
    ::close(listener);
    if (fd < 0) throw ProtocolError(ProtocolError::Code::TransportClosed, "accept failed");
    return make_fd_stream(fd);
}

std::unique_ptr<ByteStream> tcp_connect(const std::string& addr, int retries) {
    sockaddr_in sa = parse_addr(addr);
    for (int attempt = 0;; ++attempt) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw ProtocolError(ProtocolError::Code::TransportClosed, "socket() failed");
        if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0) {
            return make_fd_stream(fd);
        }
        ::close(fd);
        if (attempt >= retries) {
            throw ProtocolError(ProtocolError::Code::TransportClosed,
                                std::string("connect failed: ") + std::strerror(errno));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
}

}  // namespace dpsqkd
