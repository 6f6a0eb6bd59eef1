#include "ciams/parallel.hpp"

#include <doctest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

using namespace ciams;

TEST_CASE("each index runs once and exceptions propagate") {
    for (unsigned threads : {1U, 3U}) {
        set_thread_count(threads);
        CHECK(thread_count() == threads);
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
        for (int h : hits) CHECK(h == 1);

        std::atomic<int> inner{0};
        parallel_for(4, [&](std::size_t) { parallel_for(5, [&](std::size_t) { ++inner; }); });
        CHECK(inner == 20);

        CHECK_THROWS_AS(parallel_for(10,
                                     [](std::size_t i) {
                                         if (i == 7) throw std::runtime_error("boom");
                                     }),
                        std::runtime_error);
    }
    set_thread_count(1);
}
