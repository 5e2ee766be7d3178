#include "dpi/telemetry.hpp"

#include <doctest.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unistd.h>

using namespace dpi;
using namespace dpi::telemetry;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

struct TempDir {
    TempDir()
    {
        static std::atomic<int> n{0};
        path = std::filesystem::temp_directory_path()
             / ("dpi-telemetry-test-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::filesystem::path path;
};

SimSample sample(double temp, double p_set, double p_pv, double p_load, double p_batt)
{
    SimSample s;
    s.temperature = temp;
    s.p_set = p_set;
    s.p_pv = p_pv;
    s.p_load = p_load;
    s.p_batt = p_batt;
    return s;
}

const TimePoint kEpoch = TimePoint{} + std::chrono::hours(24 * 365 * 54);

Params update_params(const std::string& key, const SimSample& s)
{
    const std::string target = encode_update(s, key);
    return parse_query(target.substr(target.find('?') + 1));
}

} // namespace

TEST_CASE("update encoding")
{
    CHECK(encode_update(sample(31, 13, 10.2, 12.9, 2.7), "K")
          == "/update?api_key=K&field1=31.000&field2=13.000&field3=10.200&field4=12.900&field5=2.700");
    const std::string neg = encode_update(sample(31, 13, 15, 13, -2.0), "K");
    CHECK(neg.find("field5=-2.000") != std::string::npos);
    CHECK(format_field(-0.0001) == "0.000");
    CHECK(encode_update_form(sample(31, 13, 10.2, 12.9, 2.7), "a b")
          == "api_key=a%20b&field1=31.000&field2=13.000&field3=10.200&field4=12.900&field5=2.700");
}

TEST_CASE("query helpers")
{
    CHECK(url_decode(url_encode("k=&?/ x")) == "k=&?/ x");
    CHECK(url_decode("a+b%2Fc") == "a b/c");
    const Params p = parse_query("api_key=XY&field1=1.5&empty=");
    CHECK(p.at("api_key") == "XY");
    CHECK(p.at("field1") == "1.5");
    CHECK(p.at("empty").empty());
    CHECK(iso8601(TimePoint{} + 86400s + 3723s) == "1970-01-02T01:02:03Z");
}

TEST_CASE("decimation forwards the latest sample per slot")
{
    std::vector<SimSample> xs;
    for (int k = 0; k <= 600; ++k) {
        SimSample s;
        s.t = k * 0.1;
        xs.push_back(s);
    }
    const auto picked = decimate(xs, 15.0);
    REQUIRE(picked.size() == 5);
    for (std::size_t i = 0; i < picked.size(); ++i)
        CHECK(picked[i].t == doctest::Approx(15.0 * i));
}

TEST_CASE("ingest rate limit")
{
    ChannelStore store;
    store.add_channel({1, "W", "", "test"});
    const Params p = update_params("W", sample(31, 13, 10.2, 12.9, 2.7));

    auto r = store.ingest(p, kEpoch);
    CHECK(r.status == IngestStatus::Accepted);
    CHECK(r.entry_id == 1);

    r = store.ingest(p, kEpoch + 10s);
    CHECK(r.status == IngestStatus::RateLimited);
    CHECK(r.entry_id == 0);
    CHECK(store.entries(1)->size() == 1);

    r = store.ingest(p, kEpoch + 15s);
    CHECK(r.status == IngestStatus::Accepted);
    CHECK(r.entry_id == 2);

    r = store.ingest(p, kEpoch + 29999ms);
    CHECK(r.status == IngestStatus::RateLimited);
}

TEST_CASE("ingest rejects bad keys and values")
{
    ChannelStore store;
    store.add_channel({1, "W", "", ""});
    CHECK(store.ingest({{"api_key", "nope"}, {"field1", "1"}}, kEpoch).status == IngestStatus::Unauthorized);
    CHECK(store.ingest({{"field1", "1"}}, kEpoch).status == IngestStatus::Unauthorized);
    CHECK(store.ingest({{"api_key", "W"}, {"field1", "abc"}}, kEpoch).status == IngestStatus::Malformed);
    CHECK(store.entries(1)->empty());
}

TEST_CASE("feed selection")
{
    ChannelStore store;
    store.add_channel({1, "W", "", ""});
    for (int k = 0; k < 3; ++k)
        store.ingest(update_params("W", sample(20 + k, 13, 10, 12, 2)), kEpoch + k * 15s);

    auto ids = [&](std::size_t n) {
        const FeedResult f = store.fetch_feed(1, n);
        REQUIRE(f.status == FeedStatus::Ok);
        const json doc = json::parse(f.body);
        std::vector<std::uint64_t> out;
        for (const auto& e : doc["feeds"]) out.push_back(e["entry_id"]);
        return out;
    };
    CHECK(ids(0).empty());
    CHECK(ids(100) == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(ids(2) == std::vector<std::uint64_t>{2, 3});
    CHECK(store.fetch_feed(9, 10).status == FeedStatus::UnknownChannel);
}

TEST_CASE("private feeds need the read key")
{
    ChannelStore store;
    store.add_channel({4, "W", "R", ""});
    CHECK(store.fetch_feed(4, 1).status == FeedStatus::Unauthorized);
    CHECK(store.fetch_feed(4, 1, "W").status == FeedStatus::Unauthorized);
    CHECK(store.fetch_feed(4, 1, "R").status == FeedStatus::Ok);
}

TEST_CASE("concurrent ingest never stores entries closer than the interval")
{
    ChannelStore store;
    store.add_channel({1, "W", "", ""});
    const Params p = update_params("W", sample(31, 13, 10.2, 12.9, 2.7));

    std::atomic<int> accepted{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 8; ++w)
        workers.emplace_back([&, w] {
            for (int k = 0; k < 200; ++k) {
                // Clock values overlap across threads.
                const auto now = kEpoch + std::chrono::milliseconds((k * 8 + w) * 937);
                if (store.ingest(p, now).status == IngestStatus::Accepted) ++accepted;
            }
        });
    for (auto& t : workers) t.join();

    const auto entries = *store.entries(1);
    CHECK(static_cast<int>(entries.size()) == accepted.load());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(entries[i].entry_id == i + 1);
        CHECK(entries[i].fields[0] == std::optional<std::string>("31.000"));
        if (i > 0) CHECK(entries[i].created_at - entries[i - 1].created_at >= 15s);
    }
}

TEST_CASE("stored entries survive a restart")
{
    TempDir dir;
    {
        ChannelStore store(dir.path);
        store.add_channel({7, "W7", "", "seven"});
        store.ingest(update_params("W7", sample(30, 13, 11, 13, 2)), kEpoch);
        store.ingest(update_params("W7", sample(31, 13, 12, 13, 1)), kEpoch + 20s);
    }
    {
        // A torn final line from a crash mid-append is ignored.
        std::ofstream log(dir.path / "channel_7.ndjson", std::ios::app);
        log << "{\"entry_id\": 3, \"created";
    }
    ChannelStore again(dir.path);
    REQUIRE(again.channels().size() == 1);
    CHECK(again.channels()[0].name == "seven");
    const auto e = *again.entries(7);
    REQUIRE(e.size() == 2);
    CHECK(e[1].fields[0] == std::optional<std::string>("31.000"));
    CHECK(again.ingest(update_params("W7", sample(1, 1, 1, 1, 1)), kEpoch + 30s).status == IngestStatus::RateLimited);
    CHECK(again.ingest(update_params("W7", sample(1, 1, 1, 1, 1)), kEpoch + 35s).entry_id == 3);
}

TEST_CASE("http surface")
{
    ChannelStore store;
    store.add_channel({1, "KEY1", "", "one"});
    store.add_channel({2, "KEY2", "", "two"});
    std::atomic<std::int64_t> clock_s{0};
    Server server(store, [&] { return kEpoch + std::chrono::seconds(clock_s.load()); });
    const int port = server.start("127.0.0.1", 0);
    Client client("http://127.0.0.1:" + std::to_string(port));

    const SimSample s = sample(31, 13, 10.2, 12.9, -2.7);
    SendResult r = client.send(s, "KEY1");
    CHECK(r.http_status == 200);
    CHECK(r.entry_id == 1);
    CHECK(r.body == "1");

    clock_s = 10;
    r = client.send(s, "KEY1");
    CHECK(r.body == "0");
    CHECK(r.entry_id == 0);

    r = client.send(s, "KEY2");
    CHECK(r.entry_id == 1);

    clock_s = 15;
    CHECK(client.send(s, "KEY1").entry_id == 2);

    r = client.send(s, "bogus");
    CHECK(r.http_status == 401);

    const json feed1 = json::parse(client.fetch_feed(1, 10));
    CHECK(feed1["channel"]["id"] == 1);
    REQUIRE(feed1["feeds"].size() == 2);
    CHECK(feed1["feeds"][1]["field5"] == "-2.700");
    CHECK(feed1["feeds"][0]["created_at"] == iso8601(kEpoch));
    CHECK(json::parse(client.fetch_feed(2, 10))["feeds"].size() == 1);
    CHECK_THROWS(client.fetch_feed(3, 10));

    server.stop();
}
