#include <iostream>

#include "spnet_tools/cli.hpp"

int main(int argc, char** argv) {
  return spnet::tools::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                               std::cerr);
}
