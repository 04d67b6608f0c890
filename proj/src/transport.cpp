#include "rtexec/transport.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cstring>
#include <system_error>

#ifdef __linux__
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>
#endif

#include "rtexec/metrics.hpp"

namespace rtexec {

namespace {

uint64_t mono_ns() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now().time_since_epoch())
                                     .count());
}

template <typename T>
void put_le(std::vector<std::byte>& out, T v) {
    for (size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::span<const std::byte> in, size_t offset) {
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<T>(std::to_integer<uint8_t>(in[offset + i])) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::byte> encode_frame(const MessageFrame& frame) {
    std::vector<std::byte> out;
    out.reserve(kFrameHeaderBytes + frame.payload.size());
    put_le<uint32_t>(out, static_cast<uint32_t>(frame.payload.size()));
    put_le<uint16_t>(out, frame.topic);
    put_le<uint64_t>(out, frame.seq);
    put_le<uint64_t>(out, frame.publish_timestamp_ns);
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

MessageFrame decode_frame(std::span<const std::byte> bytes) {
    if (bytes.size() < kFrameHeaderBytes)
        throw MalformedFrame("short frame: " + std::to_string(bytes.size()) + " bytes");
    MessageFrame f;
    f.length = get_le<uint32_t>(bytes, 0);
    f.topic = get_le<uint16_t>(bytes, 4);
    f.seq = get_le<uint64_t>(bytes, 6);
    f.publish_timestamp_ns = get_le<uint64_t>(bytes, 14);
    if (bytes.size() != kFrameHeaderBytes + f.length)
        throw MalformedFrame("length field " + std::to_string(f.length) + " disagrees with " +
                             std::to_string(bytes.size() - kFrameHeaderBytes) + " payload bytes");
    f.payload.assign(bytes.begin() + kFrameHeaderBytes, bytes.end());
    return f;
}

void FrameReader::feed(std::span<const std::byte> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<MessageFrame> FrameReader::next() {
    const size_t avail = buf_.size() - consumed_;
    if (avail < kFrameHeaderBytes) return std::nullopt;
    std::span<const std::byte> view(buf_.data() + consumed_, avail);
    const auto length = get_le<uint32_t>(view, 0);
    const size_t total = kFrameHeaderBytes + length;
    if (avail < total) return std::nullopt;
    MessageFrame f = decode_frame(view.subspan(0, total));
    consumed_ += total;
    if (consumed_ > 64 * 1024) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<ptrdiff_t>(consumed_));
        consumed_ = 0;
    }
    return f;
}

// --------------------------------------------------------------------------
// SubscriptionQueue
// --------------------------------------------------------------------------

SubscriptionQueue::SubscriptionQueue(TopicId topic, size_t capacity)
    : topic_(std::move(topic)), capacity_(capacity) {}

bool SubscriptionQueue::enqueue(Message m) {
    bool dropped = false;
    {
        std::lock_guard lock(mu_);
        if (closed_) return false;
        if (items_.size() == capacity_) {
            items_.pop_front();
            drops_.fetch_add(1, std::memory_order_relaxed);
            dropped = true;
        }
        m.enqueue_timestamp_ns = mono_ns();
        items_.push_back(std::move(m));
    }
    cv_.notify_one();
    std::function<void()> hook;
    {
        std::lock_guard lock(hook_mu_);
        hook = ready_hook_;
    }
    if (hook) hook();
    return dropped;
}

std::optional<Message> SubscriptionQueue::pop_locked() {
    if (items_.empty()) return std::nullopt;
    Message m = std::move(items_.front());
    items_.pop_front();
    return m;
}

std::optional<Message> SubscriptionQueue::poll() {
    const int prev = consumers_.fetch_add(1, std::memory_order_acq_rel);
    assert(prev == 0 && "SubscriptionQueue: one consumer at a time");
    (void)prev;
    std::optional<Message> m;
    {
        std::lock_guard lock(mu_);
        m = pop_locked();
    }
    consumers_.fetch_sub(1, std::memory_order_acq_rel);
    return m;
}

std::optional<Message> SubscriptionQueue::await(const std::atomic<bool>* interrupt) {
    const int prev = consumers_.fetch_add(1, std::memory_order_acq_rel);
    assert(prev == 0 && "SubscriptionQueue: one consumer at a time");
    (void)prev;
    std::unique_lock lock(mu_);
    for (;;) {
        if (auto m = pop_locked()) {
            consumers_.fetch_sub(1, std::memory_order_acq_rel);
            return m;
        }
        if (closed_ || (interrupt && interrupt->load(std::memory_order_acquire))) {
            consumers_.fetch_sub(1, std::memory_order_acq_rel);
            return std::nullopt;
        }
        parks_.fetch_add(1, std::memory_order_relaxed);
        metrics::counters().thread_parks.fetch_add(1, std::memory_order_relaxed);
        waiters_.fetch_add(1, std::memory_order_relaxed);
        cv_.wait(lock);
        waiters_.fetch_sub(1, std::memory_order_relaxed);
    }
}

void SubscriptionQueue::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

void SubscriptionQueue::wake_waiters() { cv_.notify_all(); }

bool SubscriptionQueue::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

size_t SubscriptionQueue::size() const {
    std::lock_guard lock(mu_);
    return items_.size();
}

uint64_t SubscriptionQueue::drops() const { return drops_.load(std::memory_order_relaxed); }
uint64_t SubscriptionQueue::parks() const { return parks_.load(std::memory_order_relaxed); }
int SubscriptionQueue::waiters() const { return waiters_.load(std::memory_order_relaxed); }

void SubscriptionQueue::set_ready_hook(std::function<void()> hook) {
    std::lock_guard lock(hook_mu_);
    ready_hook_ = std::move(hook);
}

// --------------------------------------------------------------------------
// TopicDomain
// --------------------------------------------------------------------------

struct TopicDomain::Peer {
    int fd = -1;
    std::mutex write_mu;  // frames must not interleave
    std::atomic<bool> connected{true};
    std::thread reader;
};

TopicDomain::TopicDomain() = default;

TopicDomain::~TopicDomain() { shutdown(); }

TopicId TopicDomain::register_topic(const std::string& name) {
    std::lock_guard lock(mu_);
    for (size_t i = 0; i < topic_names_.size(); ++i)
        if (topic_names_[i] == name) return {name, static_cast<uint16_t>(i)};
    if (topic_names_.size() >= 0x10000) throw std::length_error("topic id space exhausted");
    topic_names_.push_back(name);
    subs_.push_back(std::make_shared<const std::vector<std::shared_ptr<SubscriptionQueue>>>());
    return {name, static_cast<uint16_t>(topic_names_.size() - 1)};
}

std::optional<TopicId> TopicDomain::find_topic(const std::string& name) const {
    std::lock_guard lock(mu_);
    for (size_t i = 0; i < topic_names_.size(); ++i)
        if (topic_names_[i] == name) return TopicId{name, static_cast<uint16_t>(i)};
    return std::nullopt;
}

TopicId TopicDomain::topic(const std::string& name) const {
    if (auto t = find_topic(name)) return *t;
    throw UnknownTopic(name);
}

Publisher TopicDomain::make_publisher(const TopicId& topic) {
    std::lock_guard lock(mu_);
    if (topic.value >= topic_names_.size() || topic_names_[topic.value] != topic.name)
        throw UnknownTopic(topic.name);
    return Publisher(this, topic);
}

std::shared_ptr<SubscriptionQueue> TopicDomain::subscribe(const TopicId& topic, size_t capacity) {
    std::lock_guard lock(mu_);
    if (topic.value >= topic_names_.size()) throw UnknownTopic(topic.name);
    auto q = std::make_shared<SubscriptionQueue>(topic, capacity);
    auto next =
        std::make_shared<std::vector<std::shared_ptr<SubscriptionQueue>>>(*subs_[topic.value]);
    next->push_back(q);
    subs_[topic.value] = std::move(next);
    return q;
}

DeliverySummary Publisher::publish(std::span<const std::byte> payload) {
    if (!domain_) throw std::logic_error("publisher not bound to a domain");
    return domain_->publish(topic_, next_seq_++, payload);
}

DeliverySummary TopicDomain::publish(const TopicId& topic, uint64_t seq,
                                     std::span<const std::byte> payload) {
    DeliverySummary sum;
    const uint64_t ts = mono_ns();

    std::shared_ptr<const std::vector<std::shared_ptr<SubscriptionQueue>>> local;
    std::vector<std::shared_ptr<Peer>> peers;
    {
        std::lock_guard lock(mu_);
        local = subs_[topic.value];
        peers = peers_;
    }

    if (local && !local->empty()) {
        // intra-process: payload shared by reference, no kernel involvement
        auto shared =
            std::make_shared<const std::vector<std::byte>>(payload.begin(), payload.end());
        for (const auto& q : *local) {
            Message m;
            m.payload = shared;
            m.topic = topic.value;
            m.seq = seq;
            m.publish_timestamp_ns = ts;
            if (q->enqueue(std::move(m))) sum.drops++;
            sum.intra++;
        }
    }

#ifdef __linux__
    if (!peers.empty()) {
        MessageFrame f;
        f.length = static_cast<uint32_t>(payload.size());
        f.topic = topic.value;
        f.seq = seq;
        f.publish_timestamp_ns = ts;
        f.payload.assign(payload.begin(), payload.end());
        const auto bytes = encode_frame(f);
        for (const auto& p : peers) {
            if (!p->connected.load(std::memory_order_acquire)) continue;
            std::lock_guard wl(p->write_mu);
            size_t off = 0;
            bool ok = true;
            while (off < bytes.size()) {
                ssize_t n = ::send(p->fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
                metrics::counters().transport_writes.fetch_add(1, std::memory_order_relaxed);
                if (n <= 0) {
                    ok = false;
                    break;
                }
                off += static_cast<size_t>(n);
            }
            if (ok) {
                frames_written_.fetch_add(1, std::memory_order_relaxed);
                sum.inter++;
            } else {
                p->connected.store(false, std::memory_order_release);
                write_errors_.fetch_add(1, std::memory_order_relaxed);
            }
        }
    }
#endif
    return sum;
}

#ifdef __linux__

namespace {

int make_unix_socket(const std::string& path, sockaddr_un& addr) {
    if (path.size() >= sizeof(addr.sun_path)) throw std::invalid_argument("socket path too long");
    int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw std::system_error(errno, std::generic_category(), "socket");
    std::memset(&addr, 0, sizeof(addr));
    addr.sun_family = AF_UNIX;
    std::memcpy(addr.sun_path, path.c_str(), path.size());
    return fd;
}

}  // namespace

void TopicDomain::listen(const std::string& socket_path) {
    sockaddr_un addr;
    int fd = make_unix_socket(socket_path, addr);
    ::unlink(socket_path.c_str());
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        ::close(fd);
        throw std::system_error(err, std::generic_category(), "bind " + socket_path);
    }
    if (::listen(fd, 4) != 0) {
        int err = errno;
        ::close(fd);
        throw std::system_error(err, std::generic_category(), "listen " + socket_path);
    }
    {
        std::lock_guard lock(mu_);
        listen_fd_ = fd;
        listen_path_ = socket_path;
    }
    accept_thread_ = std::thread([this, fd] {
        // poll so shutdown is observed even where close() does not wake accept()
        for (;;) {
            pollfd p{fd, POLLIN, 0};
            const int pr = ::poll(&p, 1, 200);
            if (shutdown_.load(std::memory_order_acquire)) return;
            if (pr <= 0) continue;
            int cfd = ::accept(fd, nullptr, nullptr);
            if (cfd < 0) return;  // listener closed
            add_peer(cfd);
        }
    });
}

void TopicDomain::connect(const std::string& socket_path) {
    sockaddr_un addr;
    int fd = make_unix_socket(socket_path, addr);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        ::close(fd);
        throw std::system_error(err, std::generic_category(), "connect " + socket_path);
    }
    add_peer(fd);
}

void TopicDomain::add_peer(int fd) {
    auto peer = std::make_shared<Peer>();
    peer->fd = fd;
    {
        std::lock_guard lock(mu_);
        peers_.push_back(peer);
        had_peer_ = true;
    }
    peer->reader = std::thread([this, peer] { reader_loop(peer); });
    peer_cv_.notify_all();
}

void TopicDomain::reader_loop(std::shared_ptr<Peer> peer) {
    FrameReader reader;
    std::vector<std::byte> buf(64 * 1024);
    for (;;) {
        ssize_t n = ::read(peer->fd, buf.data(), buf.size());
        metrics::counters().transport_reads.fetch_add(1, std::memory_order_relaxed);
        if (n <= 0) break;  // EOF or error: peer gone
        reader.feed({buf.data(), static_cast<size_t>(n)});
        while (auto frame = reader.next()) {
            frames_read_.fetch_add(1, std::memory_order_relaxed);
            route_frame(std::move(*frame));
        }
    }
    peer->connected.store(false, std::memory_order_release);
}

#else

void TopicDomain::listen(const std::string&) {
    throw std::runtime_error("stream sockets unsupported on this platform");
}
void TopicDomain::connect(const std::string&) {
    throw std::runtime_error("stream sockets unsupported on this platform");
}
void TopicDomain::add_peer(int) {}
void TopicDomain::reader_loop(std::shared_ptr<Peer>) {}

#endif

void TopicDomain::route_frame(MessageFrame frame) {
    std::shared_ptr<const std::vector<std::shared_ptr<SubscriptionQueue>>> local;
    {
        std::lock_guard lock(mu_);
        if (frame.topic >= subs_.size()) {
            unknown_topic_frames_.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        local = subs_[frame.topic];
    }
    if (!local || local->empty()) {
        unknown_topic_frames_.fetch_add(1, std::memory_order_relaxed);
        return;
    }
    auto shared = std::make_shared<const std::vector<std::byte>>(std::move(frame.payload));
    for (const auto& q : *local) {
        Message m;
        m.payload = shared;
        m.topic = frame.topic;
        m.seq = frame.seq;
        m.publish_timestamp_ns = frame.publish_timestamp_ns;
        q->enqueue(std::move(m));
    }
}

size_t TopicDomain::peer_count() const {
    std::lock_guard lock(mu_);
    return peers_.size();
}

bool TopicDomain::wait_for_peer(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return peer_cv_.wait_for(lock, timeout, [this] { return !peers_.empty(); });
}

bool TopicDomain::any_peer_connected() const {
    std::lock_guard lock(mu_);
    if (!had_peer_) return true;
    return std::any_of(peers_.begin(), peers_.end(),
                       [](const auto& p) { return p->connected.load(std::memory_order_acquire); });
}

TransportStats TopicDomain::stats() const {
    TransportStats s;
    s.frames_written = frames_written_.load(std::memory_order_relaxed);
    s.frames_read = frames_read_.load(std::memory_order_relaxed);
    s.write_errors = write_errors_.load(std::memory_order_relaxed);
    s.unknown_topic_frames = unknown_topic_frames_.load(std::memory_order_relaxed);
    return s;
}

void TopicDomain::shutdown() {
    if (shutdown_.exchange(true)) return;  // first call does all the work

    std::vector<std::shared_ptr<Peer>> peers;
    int listen_fd = -1;
    std::string listen_path;
    {
        std::lock_guard lock(mu_);
        peers = peers_;
        listen_fd = listen_fd_;
        listen_fd_ = -1;
        listen_path = listen_path_;
    }
#ifdef __linux__
    if (listen_fd >= 0) {
        ::shutdown(listen_fd, SHUT_RDWR);
        ::close(listen_fd);
    }
    for (const auto& p : peers)
        if (p->fd >= 0) ::shutdown(p->fd, SHUT_RDWR);
#endif
    if (accept_thread_.joinable()) accept_thread_.join();
    for (const auto& p : peers) {
        if (p->reader.joinable()) p->reader.join();
#ifdef __linux__
        if (p->fd >= 0) {
            ::close(p->fd);
            p->fd = -1;
        }
#endif
    }
    {
        std::lock_guard lock(mu_);
        for (auto& subs : subs_)
            if (subs)
                for (const auto& q : *subs) q->close();
    }
#ifdef __linux__
    if (!listen_path.empty()) ::unlink(listen_path.c_str());
#endif
}

}  // namespace rtexec
