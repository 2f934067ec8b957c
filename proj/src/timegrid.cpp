#include "petkin/timegrid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "petkin/error.hpp"

namespace petkin {

namespace {

// Contiguity is checked up to accumulated round-off of the expanded starts.
constexpr double kContiguityTol = 1e-9;

} // namespace

FrameSchedule::FrameSchedule(std::vector<double> frame_start, std::vector<double> frame_duration)
    : start_(std::move(frame_start)), duration_(std::move(frame_duration)) {
    if (start_.empty())
        throw ValidationError("frame schedule must contain at least one frame");
    if (start_.size() != duration_.size())
        throw ValidationError("frame schedule: start and duration lengths differ");
    for (std::size_t i = 0; i < start_.size(); ++i) {
        if (!(duration_[i] > 0.0) || !std::isfinite(duration_[i])) {
            std::ostringstream msg;
            msg << "frame " << i << " has non-positive duration " << duration_[i];
            throw ValidationError(msg.str());
        }
        const double expected = i == 0 ? 0.0 : end(i - 1);
        if (std::abs(start_[i] - expected) > kContiguityTol * std::max(1.0, expected)) {
            std::ostringstream msg;
            msg << "frame " << i << " starts at " << start_[i] << " s, expected " << expected
                << " s (frames must be contiguous from 0)";
            throw ValidationError(msg.str());
        }
    }
}

double FrameSchedule::min_duration() const {
    return empty() ? 0.0 : *std::min_element(duration_.begin(), duration_.end());
}

FrameSchedule make_schedule(const std::vector<Segment> &segments) {
    if (segments.empty())
        throw ValidationError("schedule needs at least one segment");
    std::vector<double> starts, durations;
    double t = 0.0;
    for (const auto &seg : segments) {
        if (seg.count < 1)
            throw ValidationError("schedule segment count must be >= 1");
        if (!(seg.duration_s > 0.0) || !std::isfinite(seg.duration_s))
            throw ValidationError("schedule segment duration must be > 0");
        for (int k = 0; k < seg.count; ++k) {
            starts.push_back(t);
            durations.push_back(seg.duration_s);
            t += seg.duration_s;
        }
    }
    return FrameSchedule(std::move(starts), std::move(durations));
}

std::vector<Segment> compress_schedule(const FrameSchedule &s) {
    std::vector<Segment> out;
    for (double d : s.durations()) {
        if (!out.empty() && out.back().duration_s == d)
            ++out.back().count;
        else
            out.push_back({1, d});
    }
    return out;
}

FrameSchedule mouse_fdg_schedule() {
    return make_schedule({{1, 30.0}, {24, 5.0}, {9, 20.0}, {8, 300.0}});
}

std::vector<double> mid_times(const FrameSchedule &s) {
    std::vector<double> mid(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        mid[i] = s.start(i) + 0.5 * s.duration(i);
    return mid;
}

FineGrid fine_grid(const FrameSchedule &s, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw ValidationError("fine grid dt must be > 0");
    if (s.empty())
        throw ValidationError("fine grid needs a non-empty schedule");
    if (dt > s.min_duration()) {
        std::ostringstream msg;
        msg << "fine grid dt " << dt << " s exceeds the shortest frame (" << s.min_duration() << " s)";
        throw ValidationError(msg.str());
    }
    const double steps = std::ceil(s.end_time() / dt - 1e-9);
    return FineGrid{dt, static_cast<std::size_t>(steps) + 1};
}

} // namespace petkin
