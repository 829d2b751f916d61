#include <iostream>
#include <string>
#include <vector>

#include "warpflow/cli.hpp"

int main(int argc, char** argv) {
  return warpflow::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
