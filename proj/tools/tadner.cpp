#include <iostream>
#include <string>
#include <vector>

#include "tadner/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return tadner::cli::run(args, std::cout, std::cerr);
}
