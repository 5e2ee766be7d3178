#include "dpi/telemetry.hpp"

#include "dpi/errors.hpp"

#include <httplib.h>

#include <charconv>
#include <thread>

namespace dpi::telemetry {

struct Server::Impl {
    ChannelStore& store;
    Clock clock;
    httplib::Server http;
    std::thread thread;

    Impl(ChannelStore& s, Clock c) : store(s), clock(std::move(c)) { routes(); }

    static Params request_params(const httplib::Request& req)
    {
        Params p;
        for (const auto& [k, v] : req.params) p[k] = v;
        const auto type = req.get_header_value("Content-Type");
        if (!req.body.empty() && type.find("application/x-www-form-urlencoded") != std::string::npos)
            for (auto& [k, v] : parse_query(req.body)) p[k] = v;
        return p;
    }

    void handle_update(const httplib::Request& req, httplib::Response& res)
    {
        const IngestResult r = store.ingest(request_params(req), clock());
        switch (r.status) {
        case IngestStatus::Accepted:
            res.set_content(std::to_string(r.entry_id), "text/plain");
            break;
        case IngestStatus::RateLimited:
            res.set_content("0", "text/plain");
            break;
        case IngestStatus::Unauthorized:
            res.status = 401;
            res.set_content("-1", "text/plain");
            break;
        case IngestStatus::Malformed:
            res.status = 400;
            res.set_content("-1", "text/plain");
            break;
        }
    }

    void routes()
    {
        http.Get("/update", [this](const auto& req, auto& res) { handle_update(req, res); });
        http.Post("/update", [this](const auto& req, auto& res) { handle_update(req, res); });
        http.Get(R"(/channels/(\d+)/feeds\.json)", [this](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t id = 0;
            const std::string id_text = req.matches[1];
            std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);

            std::size_t results = 100;
            if (req.has_param("results")) {
                const auto text = req.get_param_value("results");
                auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), results);
                if (ec != std::errc{} || ptr != text.data() + text.size()) {
                    res.status = 400;
                    res.set_content("-1", "text/plain");
                    return;
                }
            }
            const FeedResult f = store.fetch_feed(id, results, req.get_param_value("api_key"));
            switch (f.status) {
            case FeedStatus::Ok:
                res.set_content(f.body, "application/json");
                break;
            case FeedStatus::UnknownChannel:
                res.status = 404;
                res.set_content("-1", "text/plain");
                break;
            case FeedStatus::Unauthorized:
                res.status = 401;
                res.set_content("-1", "text/plain");
                break;
            }
        });
    }
};

Server::Server(ChannelStore& store, Clock clock) : impl_(std::make_unique<Impl>(store, std::move(clock))) {}

Server::~Server() { stop(); }

int Server::start(const std::string& host, int port)
{
    int bound = port;
    if (port == 0) {
        bound = impl_->http.bind_to_any_port(host);
        if (bound < 0) throw Error("cannot bind " + host);
    } else if (!impl_->http.bind_to_port(host, port)) {
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
    return bound;
}

void Server::listen(const std::string& host, int port)
{
    if (!impl_->http.bind_to_port(host, port))
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    impl_->http.listen_after_bind();
}

void Server::stop()
{
    if (!impl_) return;
    impl_->http.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

struct Client::Impl {
    httplib::Client http;
    explicit Impl(const std::string& url) : http(url)
    {
        http.set_connection_timeout(5);
        http.set_read_timeout(10);
    }
};

Client::Client(const std::string& base_url) : impl_(std::make_unique<Impl>(base_url)) {}

Client::~Client() = default;

SendResult Client::send(const SimSample& s, const std::string& write_key)
{
    std::lock_guard lock(in_flight_);
    auto res = impl_->http.Post("/update", encode_update_form(s, write_key),
                                "application/x-www-form-urlencoded");
    if (!res) throw Error("telemetry update failed: " + httplib::to_string(res.error()));
    SendResult out;
    out.http_status = res->status;
    out.body = res->body;
    if (res->status == 200) {
        std::uint64_t id = 0;
        std::from_chars(res->body.data(), res->body.data() + res->body.size(), id);
        out.entry_id = id;
    }
    return out;
}

std::string Client::fetch_feed(std::uint64_t channel_id, std::size_t results, const std::string& read_key)
{
    std::lock_guard lock(in_flight_);
    std::string path = "/channels/" + std::to_string(channel_id) + "/feeds.json?results=" + std::to_string(results);
    if (!read_key.empty()) path += "&api_key=" + url_encode(read_key);
    auto res = impl_->http.Get(path);
    if (!res) throw Error("telemetry feed fetch failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error("telemetry feed fetch returned HTTP " + std::to_string(res->status));
    return res->body;
}

} // namespace dpi::telemetry
