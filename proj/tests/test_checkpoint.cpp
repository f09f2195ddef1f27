#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "amodrl/checkpoint.hpp"

#include "helpers.hpp"

using namespace amodrl;

TEST_CASE("checkpoint roundtrip preserves names, shapes, bits", "[checkpoint]") {
  const std::string dir = testutil::fresh_dir("ckpt");
  const std::string path = dir + "/a.bin";
  StreamRng rng(3);
  NamedTensors named;
  named.emplace_back("layer.W", testutil::random_tensor(3, 4, rng));
  named.emplace_back("layer.b", testutil::random_tensor(1, 4, rng, -10, 10));
  named.emplace_back("meta/episode", Tensor::scalar(12345.0));
  save_checkpoint(path, named);
  NamedTensors back = load_checkpoint(path);
  REQUIRE(back.size() == named.size());
  for (size_t i = 0; i < named.size(); ++i) {
    REQUIRE(back[i].first == named[i].first);
    REQUIRE(back[i].second.rows == named[i].second.rows);
    REQUIRE(back[i].second.cols == named[i].second.cols);
    REQUIRE(back[i].second.data == named[i].second.data);  // bitwise
  }
}

TEST_CASE("missing file raises io error", "[checkpoint]") {
  REQUIRE_THROWS_AS(load_checkpoint("/nonexistent/path/x.bin"), IoError);
}

TEST_CASE("corrupted magic is rejected", "[checkpoint]") {
  const std::string dir = testutil::fresh_dir("ckpt");
  const std::string path = dir + "/bad.bin";
  save_checkpoint(path, {{"x", Tensor::scalar(1.0)}});
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("ZZZZ", 4);
  }
  REQUIRE_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("truncated file is rejected", "[checkpoint]") {
  const std::string dir = testutil::fresh_dir("ckpt");
  const std::string path = dir + "/trunc.bin";
  save_checkpoint(path, {{"weights", Tensor::ones(8, 8)}});
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full / 2);
  REQUIRE_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("empty tensor list roundtrips", "[checkpoint]") {
  const std::string dir = testutil::fresh_dir("ckpt");
  const std::string path = dir + "/empty.bin";
  save_checkpoint(path, {});
  REQUIRE(load_checkpoint(path).empty());
}
