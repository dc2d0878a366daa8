#include <iostream>

#include "schemeflow/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return schemeflow::cli::run_cli(args, std::cin, std::cout, std::cerr);
}
