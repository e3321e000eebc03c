#include <iostream>
#include <string>
#include <vector>

#include "scoresel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return scoresel::run_command(args, std::cout, std::cerr);
}
