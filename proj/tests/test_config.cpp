#include "crn/config.hpp"
#include "crn/errors.hpp"

#include <doctest.h>

#include <set>

using namespace crn;

TEST_SUITE("config") {
TEST_CASE("empty text gives the defaults") {
    const RunConfig c = parse_config("");
    CHECK(c.train.lr_g == 1e-4);
    CHECK(c.train.lr_d == 5e-5);
    CHECK(c.train.lr_decay == 0.7);
    CHECK(c.train.lr_decay_epochs == 40);
    CHECK(c.train.lr_floor == 1e-6);
    CHECK(c.train.lambda_gan == 1.0);
    CHECK(c.train.lambda_ae == 100.0);
    CHECK(c.train.beta_rec == 200.0);
    CHECK(c.train.lambda_f_start == 0.01);
    CHECK(c.train.lambda_f_end == 1.0);
    CHECK(c.train.lambda_f_ramp == 50000);
    CHECK(c.train.chamfer == ChamferVariant::CD2);
    CHECK(c.net.coarse_points == 64);
    CHECK(dump_config(c) == dump_config(RunConfig{}));
}

TEST_CASE("values, comments and lists") {
    const RunConfig c = parse_config(
        "# training\n"
        "lr_g=0.0001\n"
        "  lr_d = 0.00005   # discriminator\n"
        "\n"
        "encoder_stage1 = 32, 64\n"
        "disc_radii = 0.1,0.25,0.5\n"
        "mirror = false\n"
        "mirror_plane = yz\n"
        "chamfer = CD1\n"
        "removal_mode = radius\n"
        "removal_radius = 0.3\n"
        "train_data = data/manifest.txt\n");
    CHECK(c.train.lr_g == 0.0001);
    CHECK(c.train.lr_d == 0.00005);
    CHECK(c.net.encoder_stage1 == Widths{32, 64});
    CHECK(c.net.disc_radii[1] == 0.25);
    CHECK_FALSE(c.net.mirror);
    CHECK(c.net.mirror_plane == MirrorPlane::YZ);
    CHECK(c.train.chamfer == ChamferVariant::CD1);
    CHECK(c.train.removal.mode == RemovalSpec::Mode::Radius);
    CHECK(c.train.removal.radius == 0.3);
    CHECK(c.train_data == "data/manifest.txt");
}

TEST_CASE("rejections") {
    CHECK_THROWS_AS(parse_config("chamfer=CD3\n"), ValueError);
    CHECK_THROWS_WITH_AS(parse_config("learning_rate=1\n"), doctest::Contains("learning_rate"), ParseError);
    CHECK_THROWS_AS(parse_config("lr_g\n"), ParseError);
    CHECK_THROWS_AS(parse_config("lr_g=fast\n"), ValueError);
    CHECK_THROWS_WITH_AS(parse_config("lr_g=0\n"), doctest::Contains("learning rates"), ValueError);
    CHECK_THROWS_AS(parse_config("lr_decay=1.5\n"), ValueError);
    CHECK_THROWS_AS(parse_config("lambda_f_start=0\n"), ValueError);
    CHECK_THROWS_AS(parse_config("iterations=7\n"), ValueError);
    CHECK_THROWS_AS(parse_config("batch_size=-1\n"), ValueError);
    CHECK_THROWS_AS(parse_config("mirror=maybe\n"), ValueError);
    CHECK_THROWS_AS(parse_config("disc_radii=0.1,0.2\n"), ValueError);
    CHECK_THROWS_AS(parse_config("lr_g=nan\n"), ValueError);
}

TEST_CASE("normalized dump is a fixed point") {
    const RunConfig c = parse_config("lr_g=0.0003\nfeature_dim=64\nencoder_stage2=128\nresampling=true\nseed=17\n");
    const std::string dump = dump_config(c);
    CHECK(dump_config(parse_config(dump)) == dump);
    CHECK(parse_config(dump).train.lr_g == 3e-4);

    std::set<std::string> seen;
    for (const auto& k : config_keys()) {
        CHECK(seen.insert(k).second);
        CHECK(dump.find(k + "=") != std::string::npos);
    }

    const NetConfig paper = NetConfig::paper_scale();
    CHECK(dump_net_config(parse_net_config(dump_net_config(paper))) == dump_net_config(paper));
    CHECK_THROWS_AS(parse_net_config("lr_g=1\n"), ParseError);
}
}
