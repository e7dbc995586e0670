#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "voxreg/io.hpp"
#include "voxreg/types.hpp"

using namespace voxreg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("voxreg_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

Volume3 f32_volume(Dims3 d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> data(static_cast<std::size_t>(d.voxel_count()));
    // Values that are exactly f32-representable, so round-trips compare equal.
    for (double& v : data) v = static_cast<float>((rng() >> 11) * 0x1.0p-53);
    return Volume3::from_data(d, Spacing3{1.5, 2.0, 2.5}, std::move(data));
}

} // namespace

TEST_SUITE("io") {

TEST_CASE("volume round-trip is bit-exact") {
    TempDir tmp;
    Volume3 v = f32_volume(Dims3{4, 5, 6}, 1);
    const fs::path p = tmp.path / "vol.f32";
    write_volume(p, v);
    CHECK(fs::exists(p));
    CHECK(fs::exists(tmp.path / "vol.f32.json"));
    Volume3 back = read_volume(p);
    CHECK(back.dims() == v.dims());
    CHECK(back.spacing() == v.spacing());
    for (std::size_t i = 0; i < v.data().size(); ++i)
        CHECK(back.data()[i] == v.data()[i]);
}

TEST_CASE("payload size must match the sidecar") {
    TempDir tmp;
    Volume3 v = f32_volume(Dims3{4, 4, 4}, 2);
    const fs::path p = tmp.path / "vol.f32";
    write_volume(p, v);
    fs::resize_file(p, 4 * (64 - 1));
    CHECK_THROWS_AS(read_volume(p), IoError);
}

TEST_CASE("sidecar without dims is rejected") {
    TempDir tmp;
    Volume3 v = f32_volume(Dims3{4, 4, 4}, 3);
    const fs::path p = tmp.path / "vol.f32";
    write_volume(p, v);
    std::ofstream out(tmp.path / "vol.f32.json");
    out << "{\"spacing\": [1,1,1], \"dtype\": \"f32le\"}";
    out.close();
    CHECK_THROWS_AS(read_volume(p), IoError);
}

TEST_CASE("malformed sidecar json is rejected") {
    TempDir tmp;
    Volume3 v = f32_volume(Dims3{4, 4, 4}, 4);
    const fs::path p = tmp.path / "vol.f32";
    write_volume(p, v);
    std::ofstream out(tmp.path / "vol.f32.json");
    out << "{not json";
    out.close();
    CHECK_THROWS_AS(read_volume(p), IoError);
}

TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(read_volume("/nonexistent/vol.f32"), IoError);
}

TEST_CASE("mask round-trip preserves binary values") {
    TempDir tmp;
    Volume3 v(Dims3{4, 4, 4}, Spacing3{}, 0.0);
    v.at(1, 2, 3) = 1.0;
    v.at(0, 0, 0) = 1.0;
    Mask3 m = Mask3::from_volume(std::move(v));
    write_mask(tmp.path / "m.f32", m);
    Mask3 back = read_mask(tmp.path / "m.f32");
    CHECK(back.count() == 2);
    CHECK(back.volume()(1, 2, 3) == 1.0);
}

TEST_CASE("grid and gradient field round-trip through three channels") {
    TempDir tmp;
    std::mt19937_64 rng(9);
    Field3 f(Dims3{3, 4, 5});
    for (int axis = 0; axis < 3; ++axis)
        for (double& v : f.channel(axis))
            v = static_cast<float>(0.02 + 1.9 * ((rng() >> 11) * 0x1.0p-53));
    GradientField phi = GradientField::from_field(f);
    write_gradient_field(tmp.path / "phi", phi);
    CHECK(fs::exists(tmp.path / "phi.z.f32"));
    CHECK(fs::exists(tmp.path / "phi.y.f32"));
    CHECK(fs::exists(tmp.path / "phi.x.f32"));
    GradientField phi_back = read_gradient_field(tmp.path / "phi");
    for (int axis = 0; axis < 3; ++axis)
        for (std::size_t i = 0; i < f.channel(axis).size(); ++i)
            CHECK(phi_back.field().channel(axis)[i] == f.channel(axis)[i]);

    DeformationGrid g = identity_grid(Dims3{3, 4, 5});
    write_grid(tmp.path / "grid", g);
    DeformationGrid g_back = read_grid(tmp.path / "grid");
    for (int axis = 0; axis < 3; ++axis)
        for (std::size_t i = 0; i < g.field().channel(axis).size(); ++i)
            CHECK(g_back.field().channel(axis)[i] == g.field().channel(axis)[i]);
}

TEST_CASE("landmark csv round-trip") {
    TempDir tmp;
    LandmarkSet pts = LandmarkSet::from_points(
        {{"blob_0", 1.25, 2.5, 3.75}, {"ell_x_min", 0.0, 15.0, 7.125}});
    write_landmarks(tmp.path / "pts.csv", pts);
    LandmarkSet back = read_landmarks(tmp.path / "pts.csv");
    REQUIRE(back.size() == 2);
    CHECK(back.find("blob_0")->z == 1.25);
    CHECK(back.find("blob_0")->x == 3.75);
    CHECK(back.find("ell_x_min")->y == 15.0);
}

TEST_CASE("landmark csv rejects malformed input") {
    TempDir tmp;
    auto write_text = [&](const std::string& name, const std::string& text) {
        std::ofstream out(tmp.path / name);
        out << text;
    };
    write_text("dup.csv", "label,z,y,x\na,1,2,3\na,4,5,6\n");
    CHECK_THROWS_AS(read_landmarks(tmp.path / "dup.csv"), Error);
    write_text("badnum.csv", "label,z,y,x\na,1,two,3\n");
    CHECK_THROWS_AS(read_landmarks(tmp.path / "badnum.csv"), IoError);
    write_text("badheader.csv", "label,x,y,z\na,1,2,3\n");
    CHECK_THROWS_AS(read_landmarks(tmp.path / "badheader.csv"), IoError);
    write_text("short.csv", "label,z,y,x\na,1,2\n");
    CHECK_THROWS_AS(read_landmarks(tmp.path / "short.csv"), IoError);
}

TEST_CASE("affine round-trip") {
    TempDir tmp;
    std::array<double, 12> c = AffineParams::identity().coeffs();
    c[3] = 0.125;
    c[6] = -0.25;
    AffineParams a = AffineParams::from_array(c);
    write_affine(tmp.path / "a.json", a);
    AffineParams back = read_affine(tmp.path / "a.json");
    CHECK(back == a);
}

TEST_CASE("config json honors defaults and rejects unknown keys") {
    TempDir tmp;
    auto write_text = [&](const std::string& name, const std::string& text) {
        std::ofstream out(tmp.path / name);
        out << text;
    };
    write_text("cfg.json", "{\"lr0\": 0.02, \"pyramid_levels\": [2, 1]}");
    OptimConfig cfg = read_config(tmp.path / "cfg.json");
    CHECK(cfg.lr0 == 0.02);
    CHECK(cfg.pyramid_levels == std::vector<int>{2, 1});
    CHECK(cfg.max_iters == OptimConfig{}.max_iters);
    CHECK(cfg.eval_every == OptimConfig{}.eval_every);

    write_text("bad.json", "{\"lr\": 0.02}");
    CHECK_THROWS_AS(read_config(tmp.path / "bad.json"), IoError);
    write_text("invalid.json", "{\"lr0\": -1.0}");
    CHECK_THROWS_AS(read_config(tmp.path / "invalid.json"), ValidationError);

    OptimConfig full;
    full.lr0 = 0.005;
    full.max_iters = 123;
    full.pyramid_levels = {4, 2, 1};
    full.enable_affine = false;
    write_config(tmp.path / "full.json", full);
    OptimConfig full_back = read_config(tmp.path / "full.json");
    CHECK(full_back.lr0 == full.lr0);
    CHECK(full_back.max_iters == full.max_iters);
    CHECK(full_back.pyramid_levels == full.pyramid_levels);
    CHECK(full_back.enable_affine == full.enable_affine);
}

TEST_CASE("preprocess windows and rescales") {
    Volume3 v(Dims3{4, 4, 4}, Spacing3{}, 0.0);
    v.at(0, 0, 0) = 1300.0;
    v.at(0, 0, 1) = 2600.0;
    v.at(0, 0, 2) = 650.0;
    v.at(0, 0, 3) = -50.0;
    Volume3 w = preprocess(v, 0.0, 1300.0, 1.0);
    CHECK(w.dims() == v.dims());
    CHECK(w.at(0, 0, 0) == 1.0);
    CHECK(w.at(0, 0, 1) == 1.0);
    CHECK(w.at(0, 0, 2) == doctest::Approx(0.5));
    CHECK(w.at(0, 0, 3) == 0.0);

    Volume3 big(Dims3{9, 9, 9}, Spacing3{}, 2.0);
    Volume3 small = preprocess(big, 0.0, 4.0, 2.0 / 3.0);
    CHECK(small.dims() == Dims3{6, 6, 6});
    for (double x : small.data()) CHECK(x == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(preprocess(v, 10.0, 10.0, 1.0), ValidationError);
    CHECK_THROWS_AS(preprocess(v, 0.0, 1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(preprocess(v, 0.0, 1.0, 1.5), ValidationError);
}

} // TEST_SUITE
