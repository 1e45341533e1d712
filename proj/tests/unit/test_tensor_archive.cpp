// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "dlens/error.hpp"
#include "dlens/forward.hpp"
#include "dlens/model.hpp"
#include "dlens/tensor_archive.hpp"
#include "support/toy_models.hpp"

using namespace dlens;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dlens_archive_test";
  fs::create_directories(dir);
  return dir / name;
}

// Hand-assembled archive with one F16 and one BF16 tensor.
std::string half_archive() {
  const std::string header =
      R"({"h":{"dtype":"F16","shape":[2],"data_offsets":[0,4]},"b":{"dtype":"BF16","shape":[1],"data_offsets":[4,6]}})";
  std::string out(8, '\0');
  const std::uint64_t n = header.size();
  std::memcpy(out.data(), &n, 8);
  out += header;
  const unsigned char data[] = {0x00, 0x3C, 0x00, 0xC0, 0x80, 0x3F};  // 1.0, -2.0 in F16; 1.0 in BF16
  out.append(reinterpret_cast<const char*>(data), sizeof data);
  return out;
}

}  // namespace

TEST_CASE("write then read round-trips float tensors") {
  NamedTensors t;
  t["a"] = Tensor{{2, 3}, {1, 2, 3, 4, 5, 6}};
  t["b.c"] = Tensor{{1}, {-0.5f}};
  const auto path = temp_path("rt.safetensors");
  write_tensor_archive(path, t, {{"k", "v"}});
  const auto archive = TensorArchive::open(path);
  CHECK(archive.metadata().at("k") == "v");
  const auto all = archive.read_all();
  REQUIRE(all.size() == 2);
  CHECK(all.at("a").shape == std::vector<std::int64_t>{2, 3});
  CHECK(all.at("a").data == t["a"].data);
  CHECK(all.at("b.c").data == t["b.c"].data);
}

TEST_CASE("half precision dtypes are widened") {
  const auto path = temp_path("half.safetensors");
  std::ofstream(path, std::ios::binary) << half_archive();
  const auto archive = TensorArchive::open(path);
  CHECK(archive.read("h").data == std::vector<float>{1.0f, -2.0f});
  CHECK(archive.read("b").data == std::vector<float>{1.0f});
}

TEST_CASE("truncated archives are format errors") {
  NamedTensors t;
  t["a"] = Tensor{{4}, {1, 2, 3, 4}};
  const auto path = temp_path("trunc.safetensors");
  write_tensor_archive(path, t);
  fs::resize_file(path, fs::file_size(path) - 3);
  CHECK_THROWS_AS(TensorArchive::open(path), LoadError);
  std::ofstream(path, std::ios::binary) << "abc";
  CHECK_THROWS_AS(TensorArchive::open(path), LoadError);
}

TEST_CASE("the tiny GPT-2 archive header gives the model shape") {
  const auto archive = TensorArchive::open(dlens::testing::test_data_dir() / "tiny_gpt2" / "model.safetensors");
  const auto* wte = archive.find("wte.weight");
  REQUIRE(wte);
  CHECK(wte->shape == std::vector<std::int64_t>{50257, 8});
  const auto& bundle = dlens::testing::tiny_gpt2();
  CHECK(bundle.config().n_layer == 2);
  CHECK(bundle.config().n_head == 2);
  CHECK(bundle.config().d_model == 8);
  CHECK(bundle.config().d_vocab == 50257);
  CHECK(bundle.config().n_ctx == 128);
}

TEST_CASE("missing or misshapen tensors are named in load errors") {
  const auto src = TensorArchive::open(dlens::testing::test_data_dir() / "tiny_gpt2" / "model.safetensors").read_all();
  const auto config = ModelConfig::from_json_file(dlens::testing::test_data_dir() / "tiny_gpt2" / "config.json");

  SECTION("missing final layer norm weight") {
    auto t = src;
    t.erase("ln_f.weight");
    try {
      weights_from_tensors(config, t);
      FAIL("expected a load error");
    } catch (const LoadError& e) {
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("ln_f.weight"));
    }
  }
  SECTION("wrong shape") {
    auto t = src;
    t["h.1.mlp.c_fc.weight"].shape = {8, 31};
    t["h.1.mlp.c_fc.weight"].data.resize(8 * 31);
    try {
      weights_from_tensors(config, t);
      FAIL("expected a load error");
    } catch (const LoadError& e) {
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("h.1.mlp.c_fc.weight"));
    }
  }
  SECTION("unknown tensors are reported, prefixed names accepted") {
    NamedTensors t;
    for (auto& [k, v] : src) t["transformer." + k] = v;
    t["extra.thing"] = Tensor{{1}, {0}};
    std::vector<std::string> unused;
    weights_from_tensors(config, t, &unused);
    CHECK(unused == std::vector<std::string>{"extra.thing"});
  }
}

TEST_CASE("loading twice gives identical logits") {
  const auto dir = dlens::testing::test_data_dir() / "tiny_gpt2";
  const auto a = load_model_dir(dir, dlens::testing::data_dir() / "gpt2");
  const auto b = load_model_dir(dir, dlens::testing::data_dir() / "gpt2");
  const std::vector<TokenId> ids{464, 3139, 286, 4881, 318};
  const auto ta = forward(a, ids);
  const auto tb = forward(b, ids);
  CHECK((ta.logits.array() == tb.logits.array()).all());
  CHECK(a.id() == "tiny_gpt2");
}
