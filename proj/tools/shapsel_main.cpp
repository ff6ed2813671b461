#include <iostream>
#include <string>
#include <vector>

#include "shapsel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return shapsel::cli::run(args, std::cout, std::cerr);
}
