// Regenerates the seeded golden files: make_goldens <golden dir>
#include <iostream>

#include "golden_cases.hpp"
#include "tsk/checkpoint.hpp"
#include "tsk/features.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_goldens <dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  tsk::write_features(dir / "synthetic_clip.tskf", tsk::test::golden_clip().features);
  tsk::save_checkpoint(dir / "sub_super.tskm", tsk::test::golden_checkpoint());
  return 0;
}
