#include "dpi/sample_queue.hpp"

#include "dpi/errors.hpp"
#include "dpi/sample_io.hpp"

#include <atomic>
#include <string>
#include <unistd.h>

namespace dpi {

namespace {

std::filesystem::path default_spill_path()
{
    static std::atomic<unsigned> counter{0};
    return std::filesystem::temp_directory_path()
         / ("dpi-spill-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".log");
}

} // namespace

SpillQueue::SpillQueue(std::size_t memory_capacity, std::filesystem::path spill_path)
    : capacity_(memory_capacity),
      spill_path_(spill_path.empty() ? default_spill_path() : std::move(spill_path))
{
}

SpillQueue::~SpillQueue()
{
    spill_out_.close();
    spill_in_.close();
    std::error_code ec;
    std::filesystem::remove(spill_path_, ec);
}

void SpillQueue::push(const SimSample& s)
{
    {
        std::lock_guard lock(mutex_);
        if (spill_pending_ == 0 && memory_.size() < capacity_) {
            memory_.push_back(s);
        } else {
            if (!spill_out_.is_open()) {
                spill_out_.open(spill_path_, std::ios::out | std::ios::trunc);
                if (!spill_out_) throw Error("cannot open spill file " + spill_path_.string());
            }
            spill_out_ << encode_exact(s) << '\n';
            spill_out_.flush();
            if (!spill_out_) throw Error("write to spill file failed");
            ++spill_pending_;
            ++spilled_total_;
        }
    }
    ready_.notify_one();
}

std::optional<SimSample> SpillQueue::pop()
{
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return !memory_.empty() || spill_pending_ > 0 || closed_; });

    if (!memory_.empty()) {
        SimSample s = memory_.front();
        memory_.pop_front();
        return s;
    }
    if (spill_pending_ > 0) {
        if (!spill_in_.is_open()) {
            spill_in_.open(spill_path_);
            if (!spill_in_) throw Error("cannot reopen spill file " + spill_path_.string());
        }
        std::string line;
        if (!std::getline(spill_in_, line)) throw Error("spill file truncated");
        --spill_pending_;
        SimSample s = decode_exact(line);
        if (spill_pending_ == 0) reset_spill_locked();
        return s;
    }
    return std::nullopt;
}

void SpillQueue::reset_spill_locked()
{
    spill_in_.close();
    spill_in_.clear();
    spill_out_.close();
    spill_out_.clear();
}

void SpillQueue::close()
{
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    ready_.notify_all();
}

std::size_t SpillQueue::spilled_total() const
{
    std::lock_guard lock(mutex_);
    return spilled_total_;
}

BufferedSink::BufferedSink(Handler handler, std::size_t memory_capacity,
                           std::filesystem::path spill_path)
    : queue_(memory_capacity, std::move(spill_path)), handler_(std::move(handler))
{
    worker_ = std::thread([this] {
        while (auto s = queue_.pop()) {
            if (error_) continue; // keep draining so the producer side stays consistent
            try {
                handler_(*s);
            } catch (...) {
                error_ = std::current_exception();
            }
        }
    });
}

BufferedSink::~BufferedSink()
{
    if (!finished_) {
        queue_.close();
        if (worker_.joinable()) worker_.join();
    }
}

void BufferedSink::finish()
{
    if (finished_) return;
    finished_ = true;
    queue_.close();
    if (worker_.joinable()) worker_.join();
    if (error_) std::rethrow_exception(error_);
}

} // namespace dpi
