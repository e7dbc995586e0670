#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "voxreg/types.hpp"

using namespace voxreg;

TEST_SUITE("types") {

TEST_CASE("volume stores z-major") {
    Volume3 v(Dims3{2, 3, 4}, Spacing3{}, 0.0);
    v.at(1, 2, 3) = 7.0;
    CHECK(v.data()[1 * 12 + 2 * 4 + 3] == 7.0);
    CHECK(v.index(1, 2, 3) == 23);
}

TEST_CASE("volume rejects bad shapes and values") {
    CHECK_THROWS_AS(Volume3(Dims3{1, 2, 2}, Spacing3{}, 0.0), ValidationError);
    CHECK_THROWS_AS(Volume3(Dims3{2, 2, 2}, Spacing3{},
                            std::numeric_limits<double>::quiet_NaN()),
                    ValidationError);
    std::vector<double> data(8, 0.0);
    data[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Volume3::from_data(Dims3{2, 2, 2}, Spacing3{}, std::move(data)),
                    ValidationError);
    CHECK_THROWS_AS(Volume3::from_data(Dims3{2, 2, 2}, Spacing3{}, {1.0, 2.0}),
                    ValidationError);
}

TEST_CASE("checked access throws out of range") {
    Volume3 v(Dims3{2, 2, 2}, Spacing3{}, 0.0);
    CHECK_THROWS_AS(v.at(2, 0, 0), ValidationError);
    CHECK_THROWS_AS(v.at(0, -1, 0), ValidationError);
}

TEST_CASE("volume arithmetic is elementwise") {
    Volume3 a(Dims3{2, 2, 2}, Spacing3{}, 2.0);
    Volume3 b(Dims3{2, 2, 2}, Spacing3{}, 0.5);
    CHECK(add(a, b).data()[5] == 2.5);
    CHECK(subtract(a, b).data()[0] == 1.5);
    CHECK(scale(a, -2.0).data()[7] == -4.0);
    Volume3 c(Dims3{2, 2, 3}, Spacing3{}, 0.0);
    CHECK_THROWS_AS(add(a, c), ShapeMismatchError);
}

TEST_CASE("mask accepts only 0/1 and counts foreground") {
    Volume3 v(Dims3{2, 2, 2}, Spacing3{}, 0.0);
    v.at(0, 0, 0) = 1.0;
    v.at(1, 1, 1) = 1.0;
    Mask3 m = Mask3::from_volume(v);
    CHECK(m.count() == 2);
    v.at(0, 1, 0) = 0.5;
    CHECK_THROWS_AS(Mask3::from_volume(v), ValidationError);
    CHECK(Mask3::zeros(Dims3{2, 2, 2}).count() == 0);
}

TEST_CASE("gradient field validates the open interval") {
    Field3 f(Dims3{2, 2, 2}, 1.0);
    CHECK_NOTHROW(GradientField::from_field(f));
    f.channel(kAxisY)[3] = 2.0; // boundary value is excluded
    CHECK_THROWS_AS(GradientField::from_field(f), ValidationError);
    f.channel(kAxisY)[3] = 1e-9;
    CHECK_NOTHROW(GradientField::from_field(f));
    f.channel(kAxisY)[3] = 0.0;
    CHECK_THROWS_AS(GradientField::from_field(f), ValidationError);
    GradientField id = GradientField::identity(Dims3{2, 3, 2});
    for (int axis = 0; axis < 3; ++axis)
        for (double x : id.field().channel(axis)) CHECK(x == 1.0);
}

TEST_CASE("identity grid and residual") {
    DeformationGrid g = identity_grid(Dims3{2, 3, 4});
    CHECK(g.field().value(kAxisZ, 1, 0, 0) == 1.0);
    CHECK(g.field().value(kAxisY, 0, 2, 0) == 2.0);
    CHECK(g.field().value(kAxisX, 0, 0, 3) == 3.0);
    DeformationGrid r = residual_deformation(g);
    for (int axis = 0; axis < 3; ++axis)
        for (double x : r.field().channel(axis)) CHECK(x == 0.0);
}

TEST_CASE("affine identity and validation") {
    AffineParams a = AffineParams::identity();
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 4; ++col)
            CHECK(a.at(row, col) == (row == col ? 1.0 : 0.0));
    std::array<double, 12> c = a.coeffs();
    c[5] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(AffineParams::from_array(c), ValidationError);
}

TEST_CASE("landmark sets enforce unique labels and bounds") {
    CHECK_THROWS_AS(LandmarkSet::from_points({{"a", 0, 0, 0}, {"a", 1, 1, 1}}),
                    ValidationError);
    LandmarkSet s = LandmarkSet::from_points({{"a", 0, 0, 0}, {"b", 1, 1, 3}});
    CHECK(s.find("b") != nullptr);
    CHECK(s.find("c") == nullptr);
    CHECK_NOTHROW(s.require_in_bounds(Dims3{2, 2, 4}));
    CHECK_THROWS_AS(s.require_in_bounds(Dims3{2, 2, 3}), ValidationError);
}

} // TEST_SUITE
