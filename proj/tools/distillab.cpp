#include <iostream>
#include <string>
#include <vector>

#include "distillab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return distillab::cli::main_entry(args, std::cout, std::cerr);
}
