#pragma once

#include "dpi/engine.hpp"

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

namespace dpi {

// Unbounded FIFO hand-off between the simulation loop and slow consumers.
// Holds up to `memory_capacity` samples in memory; beyond that, samples are
// appended losslessly to a spill file and replayed in order. push() never
// waits for the consumer.
class SpillQueue {
public:
    explicit SpillQueue(std::size_t memory_capacity = 4096,
                        std::filesystem::path spill_path = {});
    ~SpillQueue();

    SpillQueue(const SpillQueue&) = delete;
    SpillQueue& operator=(const SpillQueue&) = delete;

    void push(const SimSample& s);

    /// Blocks until a sample is available; nullopt once closed and drained.
    std::optional<SimSample> pop();

    void close();

    std::size_t spilled_total() const;
    const std::filesystem::path& spill_path() const { return spill_path_; }

private:
    void reset_spill_locked();

    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<SimSample> memory_;
    std::size_t capacity_;
    std::filesystem::path spill_path_;
    std::ofstream spill_out_;
    std::ifstream spill_in_;
    std::size_t spill_pending_ = 0;
    std::size_t spilled_total_ = 0;
    bool closed_ = false;
};

// A SpillQueue plus a worker thread that hands each sample to `handler`.
class BufferedSink {
public:
    using Handler = std::function<void(const SimSample&)>;

    explicit BufferedSink(Handler handler, std::size_t memory_capacity = 4096,
                          std::filesystem::path spill_path = {});
    ~BufferedSink();

    void push(const SimSample& s) { queue_.push(s); }

    /// Closes the queue, waits for the worker to drain it, and rethrows the
    /// first handler exception, if any.
    void finish();

    std::size_t spilled_total() const { return queue_.spilled_total(); }

private:
    SpillQueue queue_;
    Handler handler_;
    std::exception_ptr error_;
    std::thread worker_;
    bool finished_ = false;
};

} // namespace dpi
