#include <doctest.h>

#include <algorithm>
#include <queue>
#include <vector>

#include "fabfix/patterns.hpp"

using namespace fabfix;

namespace {

PatternSpec small_spec(std::uint64_t seed) {
    PatternSpec s;
    s.width = 256;
    s.height = 256;
    s.min_shapes = 10;
    s.max_shapes = 25;
    s.min_feature = 6;
    s.max_feature = 64;
    s.seed = seed;
    return s;
}

// Connected-component sizes (4-connectivity), used as an independent probe
// of the feature-scale distribution.
std::vector<std::size_t> component_sizes(const Bitmap& bm) {
    std::vector<char> seen(bm.pixel_count(), 0);
    std::vector<std::size_t> sizes;
    for (int y = 0; y < bm.height; ++y) {
        for (int x = 0; x < bm.width; ++x) {
            std::size_t start = static_cast<std::size_t>(y) * bm.width + x;
            if (!bm.values[start] || seen[start]) continue;
            std::size_t size = 0;
            std::queue<std::pair<int, int>> q;
            q.push({x, y});
            seen[start] = 1;
            while (!q.empty()) {
                auto [cx, cy] = q.front();
                q.pop();
                ++size;
                const int nx[4] = {cx - 1, cx + 1, cx, cx};
                const int ny[4] = {cy, cy, cy - 1, cy + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || nx[k] >= bm.width || ny[k] < 0 || ny[k] >= bm.height) continue;
                    std::size_t i = static_cast<std::size_t>(ny[k]) * bm.width + nx[k];
                    if (bm.values[i] && !seen[i]) {
                        seen[i] = 1;
                        q.push({nx[k], ny[k]});
                    }
                }
            }
            sizes.push_back(size);
        }
    }
    return sizes;
}

} // namespace

TEST_CASE("generate_pattern: seeded determinism") {
    Bitmap a = generate_pattern(small_spec(7));
    Bitmap b = generate_pattern(small_spec(7));
    CHECK(a == b);
}

TEST_CASE("generate_pattern: different seeds give different layouts") {
    // Empirical over 20 seed pairs: at least 1% of pixels differ.
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        Bitmap a = generate_pattern(small_spec(seed));
        Bitmap b = generate_pattern(small_spec(seed + 1000));
        std::size_t diff = 0;
        for (std::size_t i = 0; i < a.values.size(); ++i) diff += a.values[i] != b.values[i];
        CHECK(diff >= a.pixel_count() / 100);
    }
}

TEST_CASE("generate_pattern: degenerate mix gives a single filled rectangle") {
    PatternSpec s;
    s.width = 128;
    s.height = 128;
    s.min_shapes = 1;
    s.max_shapes = 1;
    s.shape_mix = {1, 0, 0, 0, 0, 0, 0};
    s.min_feature = 64;
    s.max_feature = 64;
    s.seed = 3;
    Bitmap bm = generate_pattern(s);

    CHECK(bm.foreground_count() == 64u * 64u);
    int x0 = bm.width, x1 = -1, y0 = bm.height, y1 = -1;
    for (int y = 0; y < bm.height; ++y) {
        for (int x = 0; x < bm.width; ++x) {
            if (bm.at(x, y)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
        }
    }
    CHECK(x1 - x0 + 1 == 64);
    CHECK(y1 - y0 + 1 == 64);
}

TEST_CASE("generate_pattern: density bound holds across a corpus") {
    std::vector<Bitmap> corpus = generate_corpus(small_spec(60), 30);
    REQUIRE(corpus.size() == 30);
    for (const Bitmap& bm : corpus) {
        double density = static_cast<double>(bm.foreground_count()) / static_cast<double>(bm.pixel_count());
        CHECK(density >= 0.15);
        CHECK(density <= 0.85);
    }
}

TEST_CASE("corpus: component size histogram spans at least two decades") {
    std::vector<Bitmap> corpus = generate_corpus(small_spec(200), 30);
    std::size_t smallest = SIZE_MAX, largest = 0;
    for (const Bitmap& bm : corpus) {
        for (std::size_t size : component_sizes(bm)) {
            smallest = std::min(smallest, size);
            largest = std::max(largest, size);
        }
    }
    REQUIRE(smallest != SIZE_MAX);
    CHECK(largest >= smallest * 100);
}

TEST_CASE("generate_corpus: element i equals generate_pattern with seed base+i") {
    PatternSpec base = small_spec(400);
    std::vector<Bitmap> corpus = generate_corpus(base, 3);
    for (int i = 0; i < 3; ++i) {
        PatternSpec s = base;
        s.seed = base.seed + static_cast<std::uint64_t>(i);
        CHECK(corpus[static_cast<std::size_t>(i)] == generate_pattern(s));
    }
    CHECK(generate_corpus(base, 1).front() == generate_pattern(base));
}

TEST_CASE("generate_corpus: identical base specs give identical corpora") {
    PatternSpec base = small_spec(500);
    std::vector<Bitmap> a = generate_corpus(base, 4);
    std::vector<Bitmap> b = generate_corpus(base, 4);
    CHECK(a == b);
}

TEST_CASE("generate_pattern: infeasible spec raises a generation error") {
    PatternSpec s;
    s.width = 512;
    s.height = 512;
    s.min_shapes = 1;
    s.max_shapes = 1;
    s.min_feature = 2;
    s.max_feature = 2; // one 2-px shape can never reach 15% density
    s.seed = 1;
    CHECK_THROWS_AS(generate_pattern(s), GenerationError);
}

TEST_CASE("PatternSpec validation") {
    PatternSpec s = small_spec(1);
    s.shape_mix = {0, 0, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(generate_pattern(s), ParamError);
    s = small_spec(1);
    s.min_feature = 1;
    CHECK_THROWS_AS(generate_pattern(s), ParamError);
    s = small_spec(1);
    s.max_shapes = 0;
    CHECK_THROWS_AS(generate_pattern(s), ParamError);
}
