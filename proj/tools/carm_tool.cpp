#include <iostream>
#include <string>
#include <vector>

#include "carm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return carm::cli_main(args, std::cout, std::cerr);
}
