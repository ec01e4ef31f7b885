#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sddnn/error.hpp"
#include "sddnn/features.hpp"

using namespace sddnn;

namespace {

// Segments of the given sample counts, back to back with a 0.5 s gap, filled from `fill`.
template <class F>
LldStream make_stream(const std::vector<std::size_t>& lengths, std::size_t dim, F fill, double hop = 0.01) {
    LldStream s;
    s.session_id = "s";
    s.couple_id = "c";
    s.speaker_id = "p";
    s.hop = hop;
    s.dim = dim;
    double t = 0.0;
    std::size_t k = 0;
    for (std::size_t n : lengths) {
        Segment seg;
        seg.id = "g" + std::to_string(s.segments.size());
        seg.start = t;
        for (std::size_t i = 0; i < n; ++i, ++k) {
            for (std::size_t d = 0; d < dim; ++d) seg.samples.push_back(fill(k, d));
        }
        t += static_cast<double>(n) * hop + 0.5;
        s.segments.push_back(std::move(seg));
    }
    return s;
}

std::vector<double> column(const LldStream& s, std::size_t c) {
    std::vector<double> out;
    for (const auto& seg : s.segments) {
        for (std::size_t i = c; i < seg.samples.size(); i += s.dim) out.push_back(seg.samples[i]);
    }
    return out;
}

}  // namespace

TEST_CASE("default layout holds 28 LLDs and 168 frame columns") {
    const auto layout = LldLayout::default_layout();
    CHECK(layout.size() == 28);
    CHECK(layout.frame_dim() == 168);
    CHECK(layout.frame_column_family(0) == LldFamily::pitch);
    CHECK(layout.frame_column_family(6 * 4) == LldFamily::mfcc);
    CHECK(layout.frame_column_family(167) == LldFamily::mfb);
    CHECK_FALSE(layout.frame_column_family(168).has_value());
}

TEST_CASE("normalize_session hand values") {
    const auto s = make_stream({2}, 2, [](std::size_t k, std::size_t d) { return d == 0 ? (k == 0 ? 1.0 : 3.0) : 5.0; });
    const auto n = normalize_session(s);
    CHECK(column(n, 0) == std::vector<double>{-1.0, 1.0});
    CHECK(column(n, 1) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("normalize_session zero-means and unit-scales every varying column") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(3.0, 2.5);
    const auto s = make_stream({40, 70, 13}, 5, [&](std::size_t, std::size_t d) { return d == 4 ? 1.25 : g(rng); });
    const auto n = normalize_session(s);
    for (std::size_t c = 0; c < 5; ++c) {
        const auto col = column(n, c);
        const auto f = oracle::functionals(col);
        CHECK(std::abs(f.mean) < 1e-9);
        if (c == 4) {
            CHECK(f.stddev == 0.0);
        } else {
            CHECK(std::abs(f.stddev - 1.0) < 1e-9);
        }
    }
    const auto twice = normalize_session(n);
    for (std::size_t i = 0; i < n.segments[1].samples.size(); ++i) {
        CHECK(std::abs(twice.segments[1].samples[i] - n.segments[1].samples[i]) < 1e-9);
    }
}

TEST_CASE("normalize_session skips NaN and needs two vectors") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto s = make_stream({3}, 1, [&](std::size_t k, std::size_t) { return k == 1 ? nan : (k == 0 ? 1.0 : 3.0); });
    const auto n = normalize_session(s);
    const auto col = column(n, 0);
    CHECK(col[0] == -1.0);
    CHECK(std::isnan(col[1]));
    CHECK(col[2] == 1.0);
    CHECK_THROWS_AS(normalize_session(make_stream({1}, 1, [](auto, auto) { return 1.0; })), InputError);
}

TEST_CASE("drop_short_segments") {
    const auto s = make_stream({100, 200}, 1, [](auto, auto) { return 0.0; });
    const auto kept = drop_short_segments(s, 1.5);
    REQUIRE(kept.segments.size() == 1);
    CHECK(kept.segments[0].id == "g1");
    CHECK(drop_short_segments(s, 0.0).segments.size() == 2);
    CHECK(drop_short_segments(make_stream({150}, 1, [](auto, auto) { return 0.0; }), 1.5).segments.size() == 1);
    const auto none = drop_short_segments(make_stream({10, 20}, 1, [](auto, auto) { return 0.0; }), 1.5);
    CHECK(none.segments.empty());
    CHECK(none.total_samples() == 0);
}

TEST_CASE("functionals of 1..100") {
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(i);
    const auto f = extract_functionals(v, 1);
    CHECK(f[0] == doctest::Approx(1.99).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(99.01).epsilon(1e-12));
    CHECK(f[2] == doctest::Approx(97.02).epsilon(1e-12));
    CHECK(f[3] == 50.5);
    CHECK(f[4] == 50.5);
}

TEST_CASE("functionals of a constant column and of [0, 2]") {
    const auto f = extract_functionals(std::vector<double>{4.5, 4.5, 4.5, 4.5}, 1);
    CHECK(f == std::vector<double>{4.5, 4.5, 0.0, 4.5, 4.5, 0.0});
    const auto g = extract_functionals(std::vector<double>{0.0, 2.0}, 1);
    CHECK(g[3] == 1.0);
    CHECK(g[5] == 1.0);
}

TEST_CASE("functionals lay out column j, functional f at 6j + f") {
    // Two columns: first 1..5, second constant 7.
    std::vector<double> w;
    for (int r = 1; r <= 5; ++r) {
        w.push_back(r);
        w.push_back(7.0);
    }
    const auto f = extract_functionals(w, 2);
    REQUIRE(f.size() == 12);
    CHECK(f[3] == 3.0);
    CHECK(f[6 + 0] == 7.0);
    CHECK(f[6 + 3] == 7.0);
    CHECK(f[6 + 5] == 0.0);
}

TEST_CASE("functionals match the naive oracle on random windows") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> len(1, 50);
    std::uniform_int_distribution<std::size_t> width(1, 4);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t rows = len(rng);
        const std::size_t cols = width(rng);
        const auto w = oracle::random_vector(rng, rows * cols, -10.0, 10.0);
        const auto f = extract_functionals(w, cols);
        for (std::size_t c = 0; c < cols; ++c) {
            std::vector<double> col;
            for (std::size_t r = 0; r < rows; ++r) col.push_back(w[r * cols + c]);
            const auto o = oracle::functionals(col);
            const double* got = f.data() + 6 * c;
            CHECK(std::abs(got[0] - o.p1) < 1e-12);
            CHECK(std::abs(got[1] - o.p99) < 1e-12);
            CHECK(std::abs(got[2] - o.range) < 1e-12);
            CHECK(std::abs(got[3] - o.mean) < 1e-12);
            CHECK(std::abs(got[4] - o.median) < 1e-12);
            CHECK(std::abs(got[5] - o.stddev) < 1e-12);
        }
    }
}

TEST_CASE("adding a constant shifts location functionals only") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        auto w = oracle::random_vector(rng, 1 + rng() % 40, -1.0, 1.0);
        const double c = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
        const auto a = extract_functionals(w, 1);
        for (auto& v : w) v += c;
        const auto b = extract_functionals(w, 1);
        CHECK(std::abs(b[0] - a[0] - c) < 1e-12);
        CHECK(std::abs(b[1] - a[1] - c) < 1e-12);
        CHECK(std::abs(b[2] - a[2]) < 1e-12);
        CHECK(std::abs(b[3] - a[3] - c) < 1e-12);
        CHECK(std::abs(b[4] - a[4] - c) < 1e-12);
        CHECK(std::abs(b[5] - a[5]) < 1e-12);
    }
}

TEST_CASE("window_count agrees with enumeration") {
    CHECK(window_count(2500, 2000, 100) == 6);
    CHECK(window_count(2000, 2000, 100) == 1);
    CHECK(window_count(1999, 2000, 100) == 0);
    for (std::size_t n = 0; n < 60; ++n) {
        for (std::size_t w = 1; w < 12; ++w) {
            for (std::size_t s = 1; s < 6; ++s) CHECK(window_count(n, w, s) == oracle::enumerate_windows(n, w, s));
        }
    }
    CHECK_THROWS_AS(window_count(10, 5, 0), ConfigError);
}

TEST_CASE("window_session on 25 s of speech emits 6 frames of 6 x LLD values") {
    const auto s = make_stream({1000, 1500}, 3, [](std::size_t k, std::size_t d) { return std::sin(0.01 * k + d); });
    const auto ex = window_session(s);
    REQUIRE(ex.frames.size() == 6);
    CHECK_FALSE(ex.too_short);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(ex.frames[k].values.size() == 18);
        CHECK(ex.frames[k].window_start == static_cast<double>(k));
    }
    // Frame 2 spans speech samples 200..2199 across the segment boundary.
    std::vector<double> win;
    for (std::size_t k = 200; k < 2200; ++k) {
        for (std::size_t d = 0; d < 3; ++d) win.push_back(std::sin(0.01 * k + d));
    }
    CHECK(ex.frames[2].values == extract_functionals(win, 3));
}

TEST_CASE("window_session boundaries") {
    const auto exact = make_stream({2000}, 1, [](auto k, auto) { return static_cast<double>(k); });
    CHECK(window_session(exact).frames.size() == 1);
    const auto short_one = make_stream({1999}, 1, [](auto k, auto) { return static_cast<double>(k); });
    const auto ex = window_session(short_one);
    CHECK(ex.frames.empty());
    CHECK(ex.too_short);
    WindowConfig bad;
    bad.shift = 0.0;
    CHECK_THROWS_AS(window_session(exact, bad), ConfigError);
}

TEST_CASE("window_session drops windows containing NaN") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto s = make_stream({2200}, 1, [&](auto k, auto) { return k == 50 ? nan : 1.0; });
    const auto ex = window_session(s);
    // Windows start at 0, 100, 200; only the first covers sample 50.
    CHECK(ex.frames.size() == 2);
    CHECK(ex.dropped_nan_frames == 1);
    CHECK(ex.frames[0].window_start == 1.0);
}

TEST_CASE("wall-clock axis keeps gaps inside windows") {
    // Two 10 s segments separated by a 0.5 s gap: 20.5 s of wall time, 20 s of speech.
    const auto s = make_stream({1000, 1000}, 1, [](auto k, auto) { return static_cast<double>(k); });
    WindowConfig wall;
    wall.time_axis = TimeAxis::wall;
    const auto ex = window_session(s, wall);
    REQUIRE(ex.frames.size() == 1);
    CHECK(window_session(s).frames.size() == 1);
    WindowConfig wall_short = wall;
    wall_short.window_len = 5.0;
    // Wall windows start at 0..15 s; starts 0..5 and 11..15 fit whole, 6..10 straddle the gap.
    const auto ws = window_session(s, wall_short);
    CHECK(ws.frames.size() == 16);
    CHECK(window_session(s, WindowConfig{5.0, 1.0, TimeAxis::speech}).frames.size() == 16);
}

TEST_CASE("scaler standardizes each column") {
    const std::vector<double> a{1.0, 5.0, 2.0};
    const std::vector<double> b{3.0, 5.0, 4.0};
    const std::vector<double> c{5.0, 5.0, 9.0};
    const std::vector<std::span<const double>> rows{a, b, c};
    const auto s = fit_scaler(rows);
    CHECK(s.mean == std::vector<double>{3.0, 5.0, 5.0});
    CHECK(s.scale[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
    CHECK(s.scale[1] == 1.0);  // constant column
    CHECK(s.scale[2] == doctest::Approx(std::sqrt(26.0 / 3.0)));
    const auto z = s.apply(a);
    CHECK(z[0] == doctest::Approx(-2.0 / std::sqrt(8.0 / 3.0)));
    CHECK(z[1] == 0.0);

    CHECK(FeatureScaler{}.apply(a) == a);
    const std::vector<double> narrow{1.0};
    CHECK_THROWS_AS(s.apply(narrow), InputError);
    CHECK_THROWS_AS(fit_scaler({}), InputError);
}

TEST_CASE("scaled columns have zero mean and unit variance") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(3.0, 4.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> data(2 + rng() % 50, std::vector<double>(1 + rng() % 6));
        for (auto& r : data)
            for (auto& v : r) v = n(rng);
        std::vector<std::span<const double>> rows(data.begin(), data.end());
        const auto s = fit_scaler(rows);
        const std::size_t w = data[0].size();
        std::vector<double> sum(w, 0.0), sq(w, 0.0);
        for (const auto& r : data) {
            const auto z = s.apply(r);
            for (std::size_t c = 0; c < w; ++c) {
                sum[c] += z[c];
                sq[c] += z[c] * z[c];
            }
        }
        for (std::size_t c = 0; c < w; ++c) {
            CHECK(std::abs(sum[c] / data.size()) < 1e-9);
            CHECK(sq[c] / data.size() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}
