#pragma once

#include <cstddef>
#include <vector>

namespace petkin {

/// Fine-grid spacing used for convolution unless configured otherwise (seconds).
inline constexpr double kDefaultDt = 0.5;

/// A run of `count` consecutive frames of equal duration.
struct Segment {
    int count = 0;
    double duration_s = 0.0;

    bool operator==(const Segment &) const = default;
};

/// Contiguous acquisition frames starting at t = 0. All times in seconds.
class FrameSchedule {
public:
    FrameSchedule() = default;

    /// Validates positivity, contiguity and a zero first start; throws ValidationError.
    FrameSchedule(std::vector<double> frame_start, std::vector<double> frame_duration);

    const std::vector<double> &starts() const { return start_; }
    const std::vector<double> &durations() const { return duration_; }
    std::size_t size() const { return start_.size(); }
    bool empty() const { return start_.empty(); }

    double start(std::size_t i) const { return start_[i]; }
    double duration(std::size_t i) const { return duration_[i]; }
    double end(std::size_t i) const { return start_[i] + duration_[i]; }
    double end_time() const { return empty() ? 0.0 : end(size() - 1); }
    double min_duration() const;

    bool operator==(const FrameSchedule &) const = default;

private:
    std::vector<double> start_;
    std::vector<double> duration_;
};

FrameSchedule make_schedule(const std::vector<Segment> &segments);

/// Run-length encoding of a schedule; inverse of make_schedule.
std::vector<Segment> compress_schedule(const FrameSchedule &s);

/// 1x30 s, 24x5 s, 9x20 s, 8x300 s: 42 frames over 45.5 min.
FrameSchedule mouse_fdg_schedule();

std::vector<double> mid_times(const FrameSchedule &s);

/// Uniform grid t_j = j*dt, j = 0..n-1, covering a whole schedule.
struct FineGrid {
    double dt = kDefaultDt;
    std::size_t n = 0;

    double time(std::size_t j) const { return static_cast<double>(j) * dt; }
    double span() const { return n == 0 ? 0.0 : time(n - 1); }
};

/// n = ceil(end/dt) + 1. Rejects dt <= 0 and dt above the shortest frame.
FineGrid fine_grid(const FrameSchedule &s, double dt = kDefaultDt);

} // namespace petkin
