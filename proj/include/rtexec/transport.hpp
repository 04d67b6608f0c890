#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rtexec/model.hpp"

namespace rtexec {

// --------------------------------------------------------------------------
// Topics and frames
// --------------------------------------------------------------------------

struct TopicId {
    std::string name;
    uint16_t value = 0;  // dense, assigned at registration

    bool operator==(const TopicId&) const = default;
};

class UnknownTopic : public std::runtime_error {
public:
    explicit UnknownTopic(const std::string& name) : std::runtime_error("unknown topic " + name) {}
};

class MalformedFrame : public std::runtime_error {
public:
    explicit MalformedFrame(const std::string& what) : std::runtime_error(what) {}
};

// Wire format, little-endian, no padding:
//   [len:u32][topic:u16][seq:u64][ts:u64][payload]
inline constexpr size_t kFrameHeaderBytes = 22;

struct MessageFrame {
    uint32_t length = 0;  // payload bytes
    uint16_t topic = 0;
    uint64_t seq = 0;
    uint64_t publish_timestamp_ns = 0;
    std::vector<std::byte> payload;

    bool operator==(const MessageFrame&) const = default;
};

std::vector<std::byte> encode_frame(const MessageFrame& frame);
/// Decodes one complete frame; throws MalformedFrame on short input or a
/// length field that disagrees with the available bytes.
MessageFrame decode_frame(std::span<const std::byte> bytes);

/// Incremental decoder for stream input.
class FrameReader {
public:
    void feed(std::span<const std::byte> bytes);
    std::optional<MessageFrame> next();  // nullopt until a full frame buffered

private:
    std::vector<std::byte> buf_;
    size_t consumed_ = 0;
};

// --------------------------------------------------------------------------
// Subscription queues
// --------------------------------------------------------------------------

/// A message as delivered to a subscription: payload by reference.
struct Message {
    std::shared_ptr<const std::vector<std::byte>> payload;
    uint16_t topic = 0;
    uint64_t seq = 0;
    uint64_t publish_timestamp_ns = 0;
    uint64_t enqueue_timestamp_ns = 0;
};

inline constexpr size_t kDefaultQueueCapacity = 16;

/// Bounded FIFO, drop-oldest on overflow, single consumer at a time.
class SubscriptionQueue {
public:
    explicit SubscriptionQueue(TopicId topic, size_t capacity = kDefaultQueueCapacity);

    const TopicId& topic() const { return topic_; }

    /// Returns true if the oldest message was dropped to make room.
    bool enqueue(Message m);

    std::optional<Message> poll();                                   // non-blocking
    std::optional<Message> await(const std::atomic<bool>* interrupt = nullptr);  // blocking

    void close();          // poisons the queue; awaits return nullopt once drained
    void wake_waiters();   // nudge a blocked consumer to re-check its interrupt flag
    bool closed() const;

    size_t size() const;
    uint64_t drops() const;
    uint64_t parks() const;   // voluntary parks taken by the consumer
    int waiters() const;

    /// Invoked after each enqueue, outside the queue lock. Executors hang
    /// their wait-set notification here.
    void set_ready_hook(std::function<void()> hook);

private:
    std::optional<Message> pop_locked();

    TopicId topic_;
    size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Message> items_;
    bool closed_ = false;
    std::atomic<uint64_t> drops_{0};
    std::atomic<uint64_t> parks_{0};
    std::atomic<int> waiters_{0};
    std::atomic<int> consumers_{0};  // single-consumer-at-a-time contract
    std::function<void()> ready_hook_;
    mutable std::mutex hook_mu_;
};

// --------------------------------------------------------------------------
// Domain
// --------------------------------------------------------------------------

struct DeliverySummary {
    uint32_t intra = 0;
    uint32_t inter = 0;
    uint32_t drops = 0;
};

struct TransportStats {
    uint64_t frames_written = 0;
    uint64_t frames_read = 0;
    uint64_t write_errors = 0;      // disconnected endpoints, recorded not fatal
    uint64_t unknown_topic_frames = 0;
};

class TopicDomain;

/// Publishing handle for one (callback, topic) pair; owns the sequence
/// counter. Not thread-safe; each publisher belongs to one callback.
class Publisher {
public:
    Publisher() = default;
    const TopicId& topic() const { return topic_; }
    DeliverySummary publish(std::span<const std::byte> payload);
    uint64_t next_seq() const { return next_seq_; }

private:
    friend class TopicDomain;
    Publisher(TopicDomain* domain, TopicId topic) : domain_(domain), topic_(std::move(topic)) {}
    TopicDomain* domain_ = nullptr;
    TopicId topic_;
    uint64_t next_seq_ = 0;
};

/// Message routing for one process: intra-process queues plus optional
/// stream-socket peers. One connection per process pair carries all topics.
/// Topic numeric ids are dense registration indices; peer processes must
/// register the same topics in the same order.
class TopicDomain {
public:
    TopicDomain();
    ~TopicDomain();
    TopicDomain(const TopicDomain&) = delete;
    TopicDomain& operator=(const TopicDomain&) = delete;

    TopicId register_topic(const std::string& name);
    TopicId topic(const std::string& name) const;  // throws UnknownTopic
    std::optional<TopicId> find_topic(const std::string& name) const;

    Publisher make_publisher(const TopicId& topic);
    std::shared_ptr<SubscriptionQueue> subscribe(const TopicId& topic,
                                                 size_t capacity = kDefaultQueueCapacity);

    /// Accepts one or more peer connections on a unix stream socket.
    void listen(const std::string& socket_path);
    /// Connects to a listening peer.
    void connect(const std::string& socket_path);

    size_t peer_count() const;
    bool wait_for_peer(std::chrono::milliseconds timeout);
    /// True while at least one peer connection is alive (or none was ever made).
    bool any_peer_connected() const;

    TransportStats stats() const;
    void shutdown();

private:
    friend class Publisher;
    struct Peer;

    DeliverySummary publish(const TopicId& topic, uint64_t seq, std::span<const std::byte> payload);
    void add_peer(int fd);
    void reader_loop(std::shared_ptr<Peer> peer);
    void route_frame(MessageFrame frame);

    mutable std::mutex mu_;
    std::condition_variable peer_cv_;
    std::vector<std::string> topic_names_;
    // copy-on-write subscriber lists, atomically swapped on subscribe
    std::vector<std::shared_ptr<const std::vector<std::shared_ptr<SubscriptionQueue>>>> subs_;
    std::vector<std::shared_ptr<Peer>> peers_;
    std::thread accept_thread_;
    int listen_fd_ = -1;
    std::string listen_path_;
    std::atomic<bool> shutdown_{false};
    std::atomic<uint64_t> write_errors_{0};
    std::atomic<uint64_t> unknown_topic_frames_{0};
    std::atomic<uint64_t> frames_written_{0};
    std::atomic<uint64_t> frames_read_{0};
    bool had_peer_ = false;
};

}  // namespace rtexec
