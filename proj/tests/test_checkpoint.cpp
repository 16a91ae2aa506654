#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsal/autograd.hpp"
#include "dsal/checkpoint.hpp"
#include "dsal/common.hpp"
#include "dsal/model.hpp"
#include "tmpdir.hpp"

using namespace dsal;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.encoder_scale = EncoderScale::Tiny;
    cfg.input_height = 32;
    cfg.input_width = 64;
    return cfg;
}

Tensor rand_images(uint64_t seed, int n, int h, int w) {
    Rng rng(seed);
    Tensor x(n, 3, h, w);
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
    return x;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << bytes;
}

}  // namespace

TEST_CASE("checkpoint: full round trip restores every value bit for bit") {
    TempDir td;
    const auto cfg = tiny_cfg();
    Model src(cfg, 11);
    const auto path = td.file("full.ckpt");
    save_model(path, src, CheckpointKind::Full);

    Model dst(cfg, 99);  // different seed: every parameter differs before loading
    REQUIRE(dst.params().content_hash("") != src.params().content_hash(""));
    load_into_model(path, dst);
    CHECK(dst.params().content_hash("") == src.params().content_hash(""));

    // forward parity on the restored weights
    const Tensor x = rand_images(5, 1, cfg.input_height, cfg.input_width);
    const auto a = src.forward(make_input(x));
    const auto b = dst.forward(make_input(x));
    const Tensor& ma = a.m0.front().value();
    const Tensor& mbv = b.m0.front().value();
    for (size_t i = 0; i < ma.size(); ++i) REQUIRE(ma[i] == mbv[i]);
}

TEST_CASE("checkpoint: container echoes kind, seed, config and sorts blobs by name") {
    TempDir td;
    const auto cfg = tiny_cfg();
    Model m(cfg, 21);
    const auto path = td.file("echo.ckpt");
    save_model(path, m, CheckpointKind::Full);
    const Checkpoint ck = load_checkpoint(path);
    CHECK(ck.kind == CheckpointKind::Full);
    CHECK(ck.seed == 21);
    CHECK(ck.config == cfg);
    REQUIRE(!ck.blobs.empty());
    for (size_t i = 1; i < ck.blobs.size(); ++i)
        CHECK(ck.blobs[i - 1].first < ck.blobs[i].first);
    CHECK(ck.blobs.size() == m.params().items("").size());
}

TEST_CASE("checkpoint: general snapshot carries only the general tower and its heads") {
    TempDir td;
    Model m(tiny_cfg(), 3);
    const Checkpoint ck = snapshot_model(m, CheckpointKind::General);
    REQUIRE(!ck.blobs.empty());
    for (const auto& [name, blob] : ck.blobs) {
        const bool ok = name.rfind("general/", 0) == 0 || name.rfind("general_head/", 0) == 0;
        CHECK(ok);
    }
    CHECK(ck.blobs.size() ==
          m.params().items("general/").size() + m.params().items("general_head/").size());
}

TEST_CASE("checkpoint: general load fills the general tower and touches nothing else") {
    TempDir td;
    const auto cfg = tiny_cfg();
    Model src(cfg, 31);
    const auto path = td.file("general.ckpt");
    save_model(path, src, CheckpointKind::General);

    // different spatial size is fine for a general checkpoint (parameters are
    // resolution independent); only the encoder scale must agree
    ModelConfig other = cfg;
    other.input_height = 64;
    other.input_width = 128;
    Model dst(other, 77);
    const auto task_before = dst.params().content_hash("task/");
    const auto dec_before = dst.params().content_hash("dec_");
    load_into_model(path, dst);
    CHECK(dst.params().content_hash("general/") == src.params().content_hash("general/"));
    CHECK(dst.params().content_hash("general_head/") ==
          src.params().content_hash("general_head/"));
    CHECK(dst.params().content_hash("task/") == task_before);
    CHECK(dst.params().content_hash("dec_") == dec_before);
}

TEST_CASE("checkpoint: full load demands the exact configuration") {
    TempDir td;
    Model src(tiny_cfg(), 1);
    const auto path = td.file("full.ckpt");
    save_model(path, src, CheckpointKind::Full);

    ModelConfig wrong = tiny_cfg();
    wrong.input_width = 128;
    Model dst(wrong, 1);
    CHECK_THROWS_AS(load_into_model(path, dst), DataError);

    ModelConfig ablated = tiny_cfg();
    ablated.use_akt = false;
    Model dst2(ablated, 1);
    CHECK_THROWS_AS(load_into_model(path, dst2), DataError);
}

TEST_CASE("checkpoint: general load rejects a different encoder scale") {
    TempDir td;
    Model src(tiny_cfg(), 1);
    const auto path = td.file("general.ckpt");
    save_model(path, src, CheckpointKind::General);

    ModelConfig paper = tiny_cfg();
    paper.encoder_scale = EncoderScale::Paper;
    paper.input_height = 64;
    paper.input_width = 64;
    Model dst(paper, 1);
    CHECK_THROWS_AS(load_into_model(path, dst), DataError);
}

TEST_CASE("checkpoint: a missing blob is rejected on full load") {
    TempDir td;
    Model m(tiny_cfg(), 5);
    Checkpoint ck = snapshot_model(m, CheckpointKind::Full);
    ck.blobs.erase(ck.blobs.begin() + 3);
    const auto path = td.file("short.ckpt");
    save_checkpoint(path, ck);
    Model dst(tiny_cfg(), 5);
    CHECK_THROWS_AS(load_into_model(path, dst), DataError);
}

TEST_CASE("checkpoint: corruption and truncation are detected") {
    TempDir td;
    Model m(tiny_cfg(), 8);
    const auto path = td.file("c.ckpt");
    save_model(path, m, CheckpointKind::Full);
    const std::string good = slurp(path);
    REQUIRE(good.size() > 64);

    SUBCASE("flipped payload byte fails the checksum") {
        std::string bad = good;
        bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x40);
        spit(path, bad);
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SUBCASE("truncated file") {
        spit(path, good.substr(0, good.size() / 3));
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SUBCASE("trailing garbage") {
        spit(path, good + "xx");
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SUBCASE("wrong magic") {
        std::string bad = good;
        bad[0] = 'X';
        spit(path, bad);
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(td.file("nope.ckpt")), DataError); }
}
