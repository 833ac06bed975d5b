#include <iostream>

#include "tsk/cli.hpp"

int main(int argc, char** argv) {
  return tsk::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
