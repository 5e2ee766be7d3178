#include "dpi/telemetry.hpp"

#include "dpi/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>

namespace dpi::telemetry {

using nlohmann::json;

struct ChannelStore::Channel {
    ChannelConfig config;
    std::vector<ChannelUpdate> entries;
    std::optional<TimePoint> last_accepted_at;
    TimePoint created_at{};
    std::ofstream log;
    mutable std::mutex mutex;
};

namespace {

std::int64_t to_millis(TimePoint t)
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

TimePoint from_millis(std::int64_t ms)
{
    return TimePoint(std::chrono::duration_cast<TimePoint::duration>(std::chrono::milliseconds(ms)));
}

bool is_number(const std::string& s)
{
    if (s.empty()) return false;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    return ec == std::errc{} && ptr == last && std::isfinite(v);
}

json entry_json(const ChannelUpdate& u)
{
    json j;
    j["created_at"] = iso8601(u.created_at);
    j["entry_id"] = u.entry_id;
    for (std::size_t i = 0; i < kFieldCount; ++i)
        if (u.fields[i]) j["field" + std::to_string(i + 1)] = *u.fields[i];
    return j;
}

} // namespace

ChannelStore::ChannelStore(std::filesystem::path data_dir, std::chrono::milliseconds min_interval)
    : data_dir_(std::move(data_dir)), min_interval_(min_interval)
{
    if (data_dir_.empty()) return;
    std::filesystem::create_directories(data_dir_);
    const auto registry = data_dir_ / "channels.json";
    if (!std::filesystem::exists(registry)) return;

    std::ifstream in(registry);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("corrupt channel registry " + registry.string() + ": " + e.what());
    }
    for (const auto& c : doc) {
        auto ch = std::make_unique<Channel>();
        ch->config.id = c.at("id").get<std::uint64_t>();
        ch->config.write_key = c.at("write_key").get<std::string>();
        ch->config.read_key = c.value("read_key", "");
        ch->config.name = c.value("name", "");
        ch->created_at = from_millis(c.value("created_at_ms", std::int64_t{0}));
        replay(*ch);
        channels_[ch->config.id] = std::move(ch);
    }
}

ChannelStore::~ChannelStore() = default;

void ChannelStore::replay(Channel& ch) const
{
    const auto path = data_dir_ / ("channel_" + std::to_string(ch.config.id) + ".ndjson");
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            break; // torn final record from an interrupted write
        }
        ChannelUpdate u;
        u.entry_id = j.at("entry_id").get<std::uint64_t>();
        u.created_at = from_millis(j.at("created_at_ms").get<std::int64_t>());
        for (std::size_t i = 0; i < kFieldCount; ++i) {
            const auto key = "field" + std::to_string(i + 1);
            if (j.contains(key)) u.fields[i] = j[key].get<std::string>();
        }
        ch.last_accepted_at = u.created_at;
        ch.entries.push_back(std::move(u));
    }
    ch.log.open(path, std::ios::app);
    if (!ch.log) throw Error("cannot open channel log " + path.string());
}

void ChannelStore::persist_registry_locked() const
{
    if (data_dir_.empty()) return;
    json doc = json::array();
    for (const auto& [id, ch] : channels_)
        doc.push_back({{"id", id}, {"write_key", ch->config.write_key},
                       {"read_key", ch->config.read_key}, {"name", ch->config.name},
                       {"created_at_ms", to_millis(ch->created_at)}});
    const auto path = data_dir_ / "channels.json";
    const auto tmp = data_dir_ / "channels.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << doc.dump(2) << '\n';
        if (!out) throw Error("cannot write channel registry " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void ChannelStore::add_channel(const ChannelConfig& cfg)
{
    if (cfg.id == 0) throw ConfigError("channel id must be a positive integer");
    if (cfg.write_key.empty()) throw ConfigError("channel write key must not be empty");

    std::unique_lock lock(channels_mutex_);
    for (const auto& [id, ch] : channels_)
        if (id != cfg.id && ch->config.write_key == cfg.write_key)
            throw ConfigError("write key already used by channel " + std::to_string(id));

    auto it = channels_.find(cfg.id);
    if (it != channels_.end()) {
        std::lock_guard ch_lock(it->second->mutex);
        it->second->config = cfg;
    } else {
        auto ch = std::make_unique<Channel>();
        ch->config = cfg;
        ch->created_at = std::chrono::system_clock::now();
        if (!data_dir_.empty()) replay(*ch);
        channels_[cfg.id] = std::move(ch);
    }
    persist_registry_locked();
}

std::vector<ChannelConfig> ChannelStore::channels() const
{
    std::shared_lock lock(channels_mutex_);
    std::vector<ChannelConfig> out;
    for (const auto& [id, ch] : channels_) out.push_back(ch->config);
    return out;
}

ChannelStore::Channel* ChannelStore::find_by_key(const std::string& key) const
{
    for (const auto& [id, ch] : channels_)
        if (ch->config.write_key == key) return ch.get();
    return nullptr;
}

ChannelStore::Channel* ChannelStore::find_by_id(std::uint64_t id) const
{
    auto it = channels_.find(id);
    return it == channels_.end() ? nullptr : it->second.get();
}

IngestResult ChannelStore::ingest(const Params& params, TimePoint now)
{
    std::shared_lock map_lock(channels_mutex_);

    auto key = params.find("api_key");
    Channel* ch = key == params.end() ? nullptr : find_by_key(key->second);
    if (!ch) return {IngestStatus::Unauthorized, 0, "invalid api_key"};

    ChannelUpdate u;
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        auto it = params.find("field" + std::to_string(i + 1));
        if (it == params.end()) continue;
        if (!is_number(it->second))
            return {IngestStatus::Malformed, 0, "field" + std::to_string(i + 1) + " is not a number"};
        u.fields[i] = it->second;
    }

    std::lock_guard lock(ch->mutex);
    if (ch->last_accepted_at && now - *ch->last_accepted_at < min_interval_)
        return {IngestStatus::RateLimited, 0, "rate limited"};

    u.entry_id = ch->entries.empty() ? 1 : ch->entries.back().entry_id + 1;
    u.created_at = now;

    if (ch->log.is_open()) {
        json rec = entry_json(u);
        rec["created_at_ms"] = to_millis(now);
        ch->log << rec.dump() << '\n';
        ch->log.flush();
        if (!ch->log) return {IngestStatus::Malformed, 0, "storage failure"};
    }
    ch->entries.push_back(u);
    ch->last_accepted_at = now;
    return {IngestStatus::Accepted, u.entry_id, {}};
}

std::optional<std::vector<ChannelUpdate>> ChannelStore::entries(std::uint64_t channel_id,
                                                                std::size_t last_n) const
{
    std::shared_lock map_lock(channels_mutex_);
    Channel* ch = find_by_id(channel_id);
    if (!ch) return std::nullopt;
    std::lock_guard lock(ch->mutex);
    const std::size_t n = std::min(last_n, ch->entries.size());
    return std::vector<ChannelUpdate>(ch->entries.end() - static_cast<std::ptrdiff_t>(n), ch->entries.end());
}

FeedResult ChannelStore::fetch_feed(std::uint64_t channel_id, std::size_t last_n,
                                    const std::string& api_key) const
{
    std::shared_lock map_lock(channels_mutex_);
    Channel* ch = find_by_id(channel_id);
    if (!ch) return {FeedStatus::UnknownChannel, {}};
    if (!ch->config.read_key.empty() && api_key != ch->config.read_key)
        return {FeedStatus::Unauthorized, {}};

    std::lock_guard lock(ch->mutex);
    json channel;
    channel["id"] = ch->config.id;
    channel["name"] = ch->config.name;
    channel["field1"] = "Temperature";
    channel["field2"] = "Setting Power";
    channel["field3"] = "PV Power";
    channel["field4"] = "Load Power";
    channel["field5"] = "Battery Power";
    channel["created_at"] = iso8601(ch->created_at);
    channel["updated_at"] = iso8601(ch->last_accepted_at.value_or(ch->created_at));
    channel["last_entry_id"] = ch->entries.empty() ? json(nullptr) : json(ch->entries.back().entry_id);

    json feeds = json::array();
    const std::size_t n = std::min(last_n, ch->entries.size());
    for (std::size_t i = ch->entries.size() - n; i < ch->entries.size(); ++i)
        feeds.push_back(entry_json(ch->entries[i]));

    return {FeedStatus::Ok, json{{"channel", channel}, {"feeds", feeds}}.dump()};
}

} // namespace dpi::telemetry
