#include <doctest.h>

#include "petkin/error.hpp"
#include "petkin/timegrid.hpp"

using namespace petkin;

TEST_SUITE("timegrid") {

TEST_CASE("paper schedule expands to 42 frames ending at 2730 s") {
    const FrameSchedule s = make_schedule({{1, 30}, {24, 5}, {9, 20}, {8, 300}});
    CHECK(s.size() == 42);
    CHECK(s.end_time() == doctest::Approx(30 + 24 * 5 + 9 * 20 + 8 * 300));
    CHECK(s.end_time() == doctest::Approx(2730));
    CHECK(s == mouse_fdg_schedule());
    CHECK(s.min_duration() == 5);
}

TEST_CASE("single segment") {
    const FrameSchedule s = make_schedule({{1, 10}});
    CHECK(s.starts() == std::vector<double>{0});
    CHECK(s.durations() == std::vector<double>{10});
}

TEST_CASE("make_schedule rejects bad segments") {
    CHECK_THROWS_AS(make_schedule({}), ValidationError);
    CHECK_THROWS_AS(make_schedule({{0, 10}}), ValidationError);
    CHECK_THROWS_AS(make_schedule({{2, 0}}), ValidationError);
    CHECK_THROWS_AS(make_schedule({{2, -5}}), ValidationError);
}

TEST_CASE("schedule constructor enforces contiguity from zero") {
    CHECK_NOTHROW(FrameSchedule({0, 10}, {10, 5}));
    CHECK_THROWS_AS(FrameSchedule({0, 11}, {10, 5}), ValidationError);
    CHECK_THROWS_AS(FrameSchedule({1, 11}, {10, 5}), ValidationError);
    CHECK_THROWS_AS(FrameSchedule({0}, {10, 5}), ValidationError);
    CHECK_THROWS_AS(FrameSchedule({}, {}), ValidationError);
    CHECK_THROWS_AS(FrameSchedule({0, 10}, {10, 0}), ValidationError);
}

TEST_CASE("mid_times") {
    CHECK(mid_times(make_schedule({{1, 30}})) == std::vector<double>{15});
    CHECK(mid_times(make_schedule({{2, 10}})) == std::vector<double>{5, 15});
    const auto m = mid_times(mouse_fdg_schedule());
    CHECK(m[0] == 15);
    CHECK(m[1] == 32.5);
}

TEST_CASE("mid_times are increasing and strictly inside their frames") {
    const FrameSchedule s = make_schedule({{3, 7}, {2, 0.5}, {4, 60}});
    const auto m = mid_times(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(m[i] > s.start(i));
        CHECK(m[i] < s.end(i));
        if (i > 0)
            CHECK(m[i] > m[i - 1]);
    }
}

TEST_CASE("compress_schedule inverts make_schedule") {
    const std::vector<Segment> segs{{1, 30}, {24, 5}, {9, 20}, {8, 300}};
    CHECK(compress_schedule(make_schedule(segs)) == segs);
    const std::vector<Segment> odd{{2, 1.5}, {1, 3}, {5, 1.5}};
    CHECK(compress_schedule(make_schedule(odd)) == odd);
}

TEST_CASE("fine_grid sizes") {
    const FineGrid g = fine_grid(mouse_fdg_schedule(), 0.5);
    CHECK(g.n == 5461);
    CHECK(g.span() >= 2730);
    CHECK(fine_grid(make_schedule({{1, 10}}), 1.0).n == 11);
    const FineGrid odd = fine_grid(make_schedule({{1, 10}}), 0.3);
    CHECK(odd.n == 35);
    CHECK(odd.span() >= 10);
}

TEST_CASE("fine_grid rejects degenerate spacing") {
    const FrameSchedule s = make_schedule({{1, 10}});
    CHECK_THROWS_AS(fine_grid(s, 60), ValidationError);
    CHECK_THROWS_AS(fine_grid(s, 0), ValidationError);
    CHECK_THROWS_AS(fine_grid(s, -1), ValidationError);
}

}
