#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "latvsr/io.hpp"

using namespace latvsr;
namespace fs = std::filesystem;

namespace {
fs::path tmpdir() {
    auto d = fs::temp_directory_path() / "latvsr_io_test";
    fs::create_directories(d);
    return d;
}
}  // namespace

TEST_CASE("tensor file round trip preserves shape and bits") {
    Rng rng(1);
    Tensor t = rng.normal_tensor({3, 2, 5});
    auto p = tmpdir() / "a.ten";
    io::save_tensor(p, t);
    Tensor r = io::load_tensor(p);
    CHECK(r.shape() == t.shape());
    CHECK(r.max_abs_diff(t) == 0.0);
}

TEST_CASE("checkpoint save -> load -> save is byte identical") {
    Rng rng(2);
    io::Checkpoint ck;
    ck.kind = "denoiser";
    ck.meta = {{"config", {{"depth", 2}}}, {"note", "x"}};
    ck.tensors["b.w"] = rng.normal_tensor({4, 3});
    ck.tensors["a.w"] = rng.normal_tensor({2});
    auto p1 = tmpdir() / "c1.ckpt";
    auto p2 = tmpdir() / "c2.ckpt";
    io::save_checkpoint(p1, ck);
    io::Checkpoint loaded = io::load_checkpoint(p1);
    CHECK(loaded.kind == ck.kind);
    CHECK(loaded.meta == ck.meta);
    CHECK(loaded.tensors.at("b.w").max_abs_diff(ck.tensors.at("b.w")) == 0.0);
    io::save_checkpoint(p2, loaded);
    CHECK(io::hash_file(p1) == io::hash_file(p2));
}

TEST_CASE("checkpoint version mismatch refused with both versions in the message") {
    Rng rng(3);
    io::Checkpoint ck;
    ck.kind = "vae";
    ck.tensors["w"] = rng.normal_tensor({2, 2});
    auto p = tmpdir() / "v.ckpt";
    io::save_checkpoint(p, ck);
    // bump the little-endian uint32 version that follows the 7-byte magic
    std::string bytes = io::read_file(p);
    REQUIRE(bytes.size() > 11);
    REQUIRE(bytes[7] == 1);
    bytes[7] = 9;
    io::atomic_write(p, bytes);
    try {
        io::load_checkpoint(p);
        FAIL("expected a version error");
    } catch (const std::exception& e) {
        std::string msg = e.what();
        CHECK(msg.find("9") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
    }
}

TEST_CASE("hashing is stable and content sensitive") {
    CHECK(io::hash_string("abc") == io::hash_string("abc"));
    CHECK(io::hash_string("abc") != io::hash_string("abd"));
    CHECK(io::hash_hex(io::hash_string("")).size() == 16);
}

TEST_CASE("atomic write replaces content completely") {
    auto p = tmpdir() / "atom.txt";
    io::atomic_write(p, "first version, quite long");
    io::atomic_write(p, "short");
    CHECK(io::read_file(p) == "short");
}

TEST_CASE("json file round trip") {
    auto p = tmpdir() / "j.json";
    nlohmann::json j = {{"a", 1}, {"b", {1, 2, 3}}};
    io::write_json(p, j);
    CHECK(io::read_json(p) == j);
}

TEST_CASE("image dumps clamp and write valid headers") {
    Tensor img({2, 2});
    img[0] = -0.5;
    img[1] = 0.5;
    img[2] = 1.5;
    img[3] = 1.0;
    auto p = tmpdir() / "img.pgm";
    io::save_pgm(p, img);
    std::string bytes = io::read_file(p);
    CHECK(bytes.rfind("P5", 0) == 0);

    Tensor clip({1, 3, 2, 2});
    auto pf = tmpdir() / "f.ppm";
    io::save_ppm_frame(pf, clip, 0);
    CHECK(io::read_file(pf).rfind("P6", 0) == 0);
}
