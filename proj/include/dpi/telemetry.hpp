#pragma once

// ThingSpeak-compatible telemetry: update encoding, a channel store with an
// append-only log per channel, and the HTTP surface around it.
//
// Field mapping: field1 temperature, field2 p_set, field3 p_pv,
// field4 p_load, field5 p_batt.

#include "dpi/engine.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpi::telemetry {

using TimePoint = std::chrono::system_clock::time_point;
using Clock = std::function<TimePoint()>;
using Params = std::map<std::string, std::string>;

inline constexpr std::size_t kFieldCount = 8;
inline constexpr std::chrono::milliseconds kDefaultMinInterval{15000};

struct ChannelUpdate {
    std::uint64_t entry_id = 0;
    TimePoint created_at{};
    std::array<std::optional<std::string>, kFieldCount> fields;
};

struct ChannelConfig {
    std::uint64_t id = 0;
    std::string write_key;
    std::string read_key; // empty: public feed
    std::string name;
};

/// Request target for GET /update: `/update?api_key=K&field1=...&field5=...`
/// with values rendered to three decimals.
std::string encode_update(const SimSample& s, const std::string& write_key);

/// The same parameters as an application/x-www-form-urlencoded body.
std::string encode_update_form(const SimSample& s, const std::string& write_key);

std::string format_field(double v);
std::string url_encode(std::string_view s);
std::string url_decode(std::string_view s);
Params parse_query(std::string_view query);

/// ISO-8601 UTC with second resolution, e.g. 2024-05-01T12:00:00Z.
std::string iso8601(TimePoint t);

// Picks the most recent sample at each slot boundary 0, interval, 2*interval...
class Decimator {
public:
    explicit Decimator(double interval_s) : interval_(interval_s) {}

    /// Returns the sample to forward, if `s` closes a slot.
    std::optional<SimSample> push(const SimSample& s);

    /// Forwards the last sample if it sits exactly on a slot boundary.
    std::optional<SimSample> flush();

private:
    double interval_;
    double next_slot_ = 0.0;
    std::optional<SimSample> latest_;
};

std::vector<SimSample> decimate(std::span<const SimSample> samples, double interval_s);

enum class IngestStatus { Accepted, RateLimited, Unauthorized, Malformed };

struct IngestResult {
    IngestStatus status = IngestStatus::Malformed;
    std::uint64_t entry_id = 0; // 0 unless Accepted
    std::string message;
};

enum class FeedStatus { Ok, UnknownChannel, Unauthorized };

struct FeedResult {
    FeedStatus status = FeedStatus::Ok;
    std::string body; // JSON document when Ok
};

// Channels keyed by id; updates are routed by write key. Mutations on one
// channel are serialized; different channels proceed independently.
class ChannelStore {
public:
    /// Empty `data_dir` keeps everything in memory. Otherwise the channel
    /// registry and logs are replayed from it.
    explicit ChannelStore(std::filesystem::path data_dir = {},
                          std::chrono::milliseconds min_interval = kDefaultMinInterval);
    ~ChannelStore();

    ChannelStore(const ChannelStore&) = delete;
    ChannelStore& operator=(const ChannelStore&) = delete;

    /// Registers (or updates the keys of) a channel and persists the registry.
    void add_channel(const ChannelConfig& cfg);

    std::vector<ChannelConfig> channels() const;

    IngestResult ingest(const Params& params, TimePoint now);

    FeedResult fetch_feed(std::uint64_t channel_id, std::size_t last_n,
                          const std::string& api_key = {}) const;

    /// Snapshot of the last `last_n` entries, ascending by entry id.
    std::optional<std::vector<ChannelUpdate>> entries(std::uint64_t channel_id,
                                                      std::size_t last_n = SIZE_MAX) const;

    std::chrono::milliseconds min_interval() const { return min_interval_; }

private:
    struct Channel;

    Channel* find_by_key(const std::string& key) const;
    Channel* find_by_id(std::uint64_t id) const;
    void persist_registry_locked() const;
    void replay(Channel& ch) const;

    std::filesystem::path data_dir_;
    std::chrono::milliseconds min_interval_;
    mutable std::shared_mutex channels_mutex_;
    std::map<std::uint64_t, std::unique_ptr<Channel>> channels_;
};

// HTTP front end over a ChannelStore.
//   GET|POST /update                      -> entry id, or "0" when rate limited
//   GET /channels/{id}/feeds.json?results=N
class Server {
public:
    Server(ChannelStore& store, Clock clock = [] { return std::chrono::system_clock::now(); });
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and serves on a background thread. port 0 picks a free port.
    /// Returns the bound port; throws Error on bind failure.
    int start(const std::string& host, int port);

    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);

    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SendResult {
    int http_status = 0;
    std::uint64_t entry_id = 0; // 0 when rate limited
    std::string body;
};

// Single-flight client: at most one update in transit at a time.
class Client {
public:
    /// `base_url` like http://127.0.0.1:3000
    explicit Client(const std::string& base_url);
    ~Client();

    SendResult send(const SimSample& s, const std::string& write_key);

    /// Raw feed document. Throws Error on transport failure.
    std::string fetch_feed(std::uint64_t channel_id, std::size_t results,
                           const std::string& read_key = {});

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::mutex in_flight_;
};

} // namespace dpi::telemetry
