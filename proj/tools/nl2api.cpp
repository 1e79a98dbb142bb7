#include <iostream>
#include <string>
#include <vector>

#include "nl2api/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nl2api::run_cli(args, std::cout, std::cerr);
}
