#include <iostream>

#include "ptyx/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ptyx::cli::run(args, std::cout, std::cerr);
}
