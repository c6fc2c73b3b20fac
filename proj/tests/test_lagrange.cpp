#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tagtrack/grid_ops.hpp"
#include "tagtrack/lagrange.hpp"

using namespace tagtrack;

TEST_CASE("compose_sequence of zero fields is zero") {
    std::vector<VectorField> inf(4, VectorField(8, 8, FieldKind::displacement));
    auto lag = compose_sequence(inf);
    REQUIRE(lag.size() == 4);
    for (const auto& f : lag) {
        for (double v : f.dx) REQUIRE(v == 0.0);
        for (double v : f.dy) REQUIRE(v == 0.0);
    }
}

TEST_CASE("compose_sequence accumulates constant translations") {
    std::vector<VectorField> inf;
    for (int n = 0; n < 5; ++n) {
        VectorField f(16, 16, FieldKind::displacement);
        std::fill(f.dx.begin(), f.dx.end(), 1.0);
        inf.push_back(f);
    }
    auto lag = compose_sequence(inf);
    for (size_t n = 0; n < lag.size(); ++n)
        for (size_t i = 0; i < lag[n].size(); ++i) {
            REQUIRE(std::abs(lag[n].dx[i] - double(n + 1)) <= 1e-6);
            REQUIRE(std::abs(lag[n].dy[i]) <= 1e-6);
        }
}

TEST_CASE("compose_sequence agrees with per-point sequential tracking") {
    Rng rng(211);
    std::vector<VectorField> inf;
    for (int n = 0; n < 5; ++n) inf.push_back(oracle::smooth_field(64, 64, 1.5, rng));
    auto lag = compose_sequence(inf);

    for (int trial = 0; trial < 30; ++trial) {
        Point2 p0{rng.uniform(12.0, 51.0), rng.uniform(12.0, 51.0)};
        // independent oracle: carry the point through each INF field in turn
        double px = p0.x, py = p0.y;
        for (const auto& f : inf) {
            double vx, vy;
            oracle::sample_field(f, px, py, vx, vy);
            px += vx;
            py += vy;
        }
        PointSet in;
        in.points.push_back(p0);
        PointSet out = track_points(lag.back(), in);
        REQUIRE(std::hypot(out.points[0].x - px, out.points[0].y - py) < 0.05);
    }
}

TEST_CASE("compose_sequence prefix property") {
    Rng rng(223);
    std::vector<VectorField> inf;
    for (int n = 0; n < 4; ++n) inf.push_back(oracle::smooth_field(12, 12, 1.0, rng));
    auto full = compose_sequence(inf);
    std::vector<VectorField> prefix(inf.begin(), inf.begin() + 2);
    auto part = compose_sequence(prefix);
    for (size_t n = 0; n < part.size(); ++n) {
        REQUIRE(part[n].dx == full[n].dx);
        REQUIRE(part[n].dy == full[n].dy);
    }
    // first Lagrangian field is the first INF field exactly
    REQUIRE(full[0].dx == inf[0].dx);
    REQUIRE(full[0].dy == inf[0].dy);
}

TEST_CASE("compose_sequence of two fields matches compose_fields") {
    Rng rng(227);
    VectorField f1 = oracle::smooth_field(10, 10, 1.0, rng);
    VectorField f2 = oracle::smooth_field(10, 10, 1.0, rng);
    auto lag = compose_sequence({f1, f2});
    VectorField direct = compose_fields(f2, f1);
    REQUIRE(lag[1].dx == direct.dx);
    REQUIRE(lag[1].dy == direct.dy);
}

TEST_CASE("compose_sequence validates its input") {
    REQUIRE_THROWS_AS(compose_sequence({}), std::invalid_argument);
    std::vector<VectorField> bad{VectorField(4, 4, FieldKind::displacement),
                                 VectorField(4, 5, FieldKind::displacement)};
    REQUIRE_THROWS_AS(compose_sequence(bad), std::invalid_argument);
}

TEST_CASE("compose_sequence gradients agree with finite differences") {
    Rng rng(229);
    std::vector<VectorField> inf;
    for (int n = 0; n < 3; ++n) inf.push_back(oracle::smooth_field(12, 12, 1.2, rng));
    std::vector<VectorField> R;
    for (int n = 0; n < 3; ++n) {
        VectorField r(12, 12, FieldKind::displacement);
        for (auto& v : r.dx) v = rng.uniform(-1.0, 1.0);
        for (auto& v : r.dy) v = rng.uniform(-1.0, 1.0);
        R.push_back(r);
    }
    auto loss = [&]() {
        auto lag = compose_sequence(inf);
        double L = 0.0;
        for (size_t n = 0; n < lag.size(); ++n)
            for (size_t i = 0; i < lag[n].size(); ++i)
                L += R[n].dx[i] * lag[n].dx[i] + R[n].dy[i] * lag[n].dy[i];
        return L;
    };
    auto lag = compose_sequence(inf);
    std::vector<VectorField> adj_inf(3, VectorField(12, 12, FieldKind::displacement));
    compose_sequence_backward(inf, lag, R, &adj_inf);

    const double h = 1e-4;
    for (int probe = 0; probe < 60; ++probe) {
        size_t n = static_cast<size_t>(rng.uniform(0, 3.0));
        size_t i = static_cast<size_t>(rng.uniform(0, 144.0));
        double fd = oracle::fd_slot(inf[n].dx, i, h, loss);
        REQUIRE(std::abs(adj_inf[n].dx[i] - fd) <=
                1e-3 * std::max({std::abs(adj_inf[n].dx[i]), std::abs(fd), 1e-3}));
        fd = oracle::fd_slot(inf[n].dy, i, h, loss);
        REQUIRE(std::abs(adj_inf[n].dy[i] - fd) <=
                1e-3 * std::max({std::abs(adj_inf[n].dy[i]), std::abs(fd), 1e-3}));
    }
}

TEST_CASE("track_points basics") {
    VectorField zero(8, 8, FieldKind::displacement);
    PointSet pts;
    pts.points = {{1.5, 2.5}, {3.0, 4.0}};
    PointSet out = track_points(zero, pts);
    REQUIRE(out.points[0].x == 1.5);
    REQUIRE(out.points[1].y == 4.0);

    VectorField shift(8, 8, FieldKind::displacement);
    std::fill(shift.dx.begin(), shift.dx.end(), 2.0);
    std::fill(shift.dy.begin(), shift.dy.end(), -1.0);
    out = track_points(shift, pts);
    REQUIRE(out.points[0].x == Catch::Approx(3.5).margin(1e-12));
    REQUIRE(out.points[0].y == Catch::Approx(1.5).margin(1e-12));
}

TEST_CASE("track_points matches bilinear sampling by hand") {
    Rng rng(233);
    VectorField Phi = oracle::smooth_field(10, 10, 2.0, rng);
    PointSet pts;
    for (int i = 0; i < 20; ++i)
        pts.points.push_back({rng.uniform(0.0, 9.0), rng.uniform(0.0, 9.0)});
    PointSet out = track_points(Phi, pts);
    for (size_t i = 0; i < pts.size(); ++i) {
        double vx, vy;
        oracle::sample_field(Phi, pts.points[i].x, pts.points[i].y, vx, vy);
        REQUIRE(std::abs(out.points[i].x - (pts.points[i].x + vx)) <= 1e-12);
        REQUIRE(std::abs(out.points[i].y - (pts.points[i].y + vy)) <= 1e-12);
    }
}

TEST_CASE("track_points reports out-of-frame positions unclamped") {
    VectorField Phi(8, 8, FieldKind::displacement);
    std::fill(Phi.dx.begin(), Phi.dx.end(), 10.0);
    PointSet pts;
    pts.points = {{7.0, 3.0}};
    PointSet out = track_points(Phi, pts);
    REQUIRE(out.points[0].x == Catch::Approx(17.0).margin(1e-12));

    PointSet bad;
    bad.points = {{std::nan(""), 0.0}};
    REQUIRE_THROWS_AS(track_points(Phi, bad), std::invalid_argument);
}
