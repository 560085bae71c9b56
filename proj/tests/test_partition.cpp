#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pfstab/error.hpp"
#include "pfstab/partition.hpp"

using namespace pfstab;

namespace {

Partition unit_line(std::size_t n, bool wrap = false) {
    return Partition::build_grid({{0.0, 1.0}}, {n}, {wrap}, Box{{{0.41, 0.49}}});
}

Partition square(std::size_t n) {
    return Partition::build_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {n, n}, {false, false},
                                 Box{{{-0.01, 0.01}, {-0.01, 0.01}}});
}

}  // namespace

TEST_CASE("index layout: ordinary cells, then sink, then attractor") {
    const Partition p = unit_line(10);
    CHECK(p.grid_cell_count() == 10);
    CHECK(p.attractor_grid_cells() == std::vector<std::size_t>{4});
    CHECK(p.ordinary_count() == 9);
    CHECK(p.index_count() == 11);
    CHECK(p.restricted_size() == 10);
    CHECK(p.sink_index() == 9);
    CHECK(p.attractor_index() == 10);
    CHECK(p.grid_linear(4) == 5);
    CHECK(p.index_of_grid_cell(4).value == p.attractor_index());
}

TEST_CASE("cells are half-open except the last closed cell") {
    const Partition p = unit_line(10);
    CHECK(p.locate(std::vector<double>{0.0}).value == 0);
    CHECK(p.locate(std::vector<double>{0.1}).value == 1);
    CHECK(p.locate(std::vector<double>{0.35}).value == 3);
    // Cell edges are lower + i * width as computed in double precision.
    CHECK(p.locate(std::vector<double>{3 * 0.1}).value == 3);
    CHECK(p.locate(std::vector<double>{std::nextafter(3 * 0.1, 0.0)}).value == 2);
    CHECK(p.locate(std::vector<double>{0.45}).value == p.attractor_index());
    CHECK(p.locate(std::vector<double>{1.0}).value == 8);
    CHECK(p.locate(std::vector<double>{1.0 + 1e-12}).is_outside());
    CHECK(p.locate(std::vector<double>{-1e-12}).is_outside());
    CHECK(p.locate(std::vector<double>{NAN}).is_outside());
}

TEST_CASE("periodic dimensions wrap instead of leaving") {
    const Partition p = unit_line(10, true);
    CHECK(p.locate(std::vector<double>{1.05}).value == 0);
    CHECK(p.locate(std::vector<double>{-0.05}).value == 8);
    CHECK(p.locate(std::vector<double>{1.0}).value == 0);
    CHECK(p.wrapped(std::vector<double>{2.25})[0] == doctest::Approx(0.25));
}

TEST_CASE("clamping projects onto non-periodic bounds only") {
    const Partition p = Partition::build_grid({{-std::numbers::pi, std::numbers::pi}, {-10.0, 10.0}}, {10, 10},
                                              {true, false}, Box{{{-0.1, 0.1}, {-0.1, 0.1}}});
    std::vector<double> x{4.0, 12.0};
    p.clamp_in_place(x);
    CHECK(x[0] == 4.0);
    CHECK(x[1] == 10.0);
}

TEST_CASE("row-major order with the first dimension slowest") {
    const Partition p = square(4);
    CHECK(p.attractor_grid_cells() == std::vector<std::size_t>{5, 6, 9, 10});
    CHECK(p.ordinary_count() == 12);
    CHECK(p.grid_coords(0) == std::vector<std::size_t>{0, 0});
    CHECK(p.grid_coords(1) == std::vector<std::size_t>{0, 1});
    CHECK(p.grid_coords(4) == std::vector<std::size_t>{1, 0});
    CHECK(p.grid_coords(5) == std::vector<std::size_t>{1, 3});
    const Point c = p.cell_center(0);
    CHECK(c[0] == doctest::Approx(-0.75));
    CHECK(c[1] == doctest::Approx(-0.75));
    CHECK(p.cell_volume() == doctest::Approx(0.25));
    CHECK(p.domain_volume() == doctest::Approx(4.0));
    CHECK(p.attractor_volume() == doctest::Approx(1.0));
}

TEST_CASE("attractor box aligned with grid lines takes no neighbours") {
    const Partition p = Partition::build_grid({{0.0, 1.0}}, {10}, {false}, Box{{{0.4, 0.5}}});
    CHECK(p.attractor_grid_cells() == std::vector<std::size_t>{4});
}

TEST_CASE("invalid grids are configuration errors") {
    CHECK_THROWS_AS(Partition::build_grid({{1.0, 0.0}}, {4}, {false}, Box{{{0.5, 0.5}}}), Error);
    CHECK_THROWS_AS(Partition::build_grid({{0.0, 1.0}}, {1}, {false}, Box{{{0.5, 0.6}}}), Error);
    CHECK_THROWS_AS(Partition::build_grid({{0.0, 1.0}}, {4}, {false}, Box{{{2.0, 3.0}}}), Error);
    CHECK_THROWS_AS(Partition::build_grid({{0.0, 1.0}}, {4}, {false}, Box{{{-1.0, 2.0}}}), Error);
    CHECK_THROWS_AS(Partition::build_grid({{0.0, 1.0}}, {4, 4}, {false}, Box{{{0.5, 0.6}}}), Error);
}

TEST_CASE("cell samples stay strictly inside their cell") {
    const Partition p = square(6);
    for (auto scheme : {SampleScheme::UniformSubgrid, SampleScheme::StratifiedRandom}) {
        for (std::size_t c = 0; c < p.ordinary_count(); ++c) {
            const auto pts = p.cell_samples(c, 10, scheme, 7);
            REQUIRE(pts.size() == 10);
            for (const auto& x : pts) CHECK(p.locate(x).value == c);
        }
    }
    CHECK(p.cell_samples(3, 10, SampleScheme::StratifiedRandom, 7) ==
          p.cell_samples(3, 10, SampleScheme::StratifiedRandom, 7));
    CHECK(p.cell_samples(3, 10, SampleScheme::StratifiedRandom, 7) !=
          p.cell_samples(3, 10, SampleScheme::StratifiedRandom, 8));
    CHECK_THROWS_AS(p.cell_samples(p.sink_index(), 4, SampleScheme::UniformSubgrid, 0), Error);
}

TEST_CASE("balanced factorization") {
    CHECK(balanced_factors(10, 2) == std::vector<std::size_t>{5, 2});
    CHECK(balanced_factors(8, 2) == std::vector<std::size_t>{4, 2});
    CHECK(balanced_factors(9, 2) == std::vector<std::size_t>{3, 3});
    CHECK(balanced_factors(7, 2) == std::vector<std::size_t>{7, 1});
    CHECK(balanced_factors(6, 1) == std::vector<std::size_t>{6});
}

TEST_CASE("grid hash tracks geometry") {
    CHECK(square(6).grid_hash() == square(6).grid_hash());
    CHECK(square(6).grid_hash() != square(8).grid_hash());
    CHECK(unit_line(10).grid_hash() != unit_line(10, true).grid_hash());
}
