#include <iostream>
#include <string>
#include <vector>

#include "embedforge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return embedforge::run_cli(args, std::cout, std::cerr);
}
