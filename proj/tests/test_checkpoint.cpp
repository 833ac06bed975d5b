#include <doctest.h>

#include <fstream>
#include <iterator>

#include "golden_cases.hpp"
#include "support.hpp"
#include "tsk/checkpoint.hpp"

using namespace tsk;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FormatErrorKind decode_error(std::string_view bytes) {
  try {
    decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode succeeded");
  return FormatErrorKind::invalid;
}

}  // namespace

TEST_CASE("checkpoints round trip every head") {
  for (Mode mode : {Mode::segmented, Mode::continuous}) {
    for (HeadKind kind : all_head_kinds()) {
      if (!supports(mode, kind)) continue;
      HeadConfig c;
      c.mode = mode;
      c.kind = kind;
      c.feature_dim = 3;
      c.num_classes = 2;
      c.hidden = 4;
      c.pyramid_levels = {1, 3};
      c.window = 5;
      c.output_offset = 85.0;
      c.output_scale = 8.5;
      const Checkpoint original{Model::create(c, 21), "whatever"};
      const std::string bytes = encode_checkpoint(original);
      const Checkpoint back = decode_checkpoint(bytes);
      CHECK(back.model.config() == c);
      CHECK(back.task == "whatever");
      for (std::size_t k = 0; k < back.model.parameters().size(); ++k) {
        CHECK(back.model.parameters()[k].name == original.model.parameters()[k].name);
        CHECK(back.model.parameters()[k].value == original.model.parameters()[k].value);
      }
      CHECK(encode_checkpoint(back) == bytes);
    }
  }
}

TEST_CASE("checkpoint golden bytes") {
  const auto golden = tsk::test::golden_checkpoint();
  const std::string expect = slurp(tsk::test::golden_dir() / "sub_super.tskm");
  CHECK(encode_checkpoint(golden) == expect);
  const auto dir = tsk::test::scratch_dir("ckpt");
  save_checkpoint(dir / "m.tskm", golden);
  CHECK(slurp(dir / "m.tskm") == expect);
  CHECK(encode_checkpoint(load_checkpoint(dir / "m.tskm")) == expect);
}

TEST_CASE("checkpoint error kinds") {
  const std::string good = encode_checkpoint(tsk::test::golden_checkpoint());
  CHECK(decode_error(good.substr(0, 6)) == FormatErrorKind::truncated);
  CHECK(decode_error(good.substr(0, good.size() - 3)) == FormatErrorKind::truncated);
  std::string magic = good;
  magic[3] = 'X';
  CHECK(decode_error(magic) == FormatErrorKind::bad_magic);
  std::string version = good;
  version[4] = 7;
  CHECK(decode_error(version) == FormatErrorKind::bad_version);
  CHECK(decode_error(good + "zz") == FormatErrorKind::invalid);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.tskm"), IoError);
}
