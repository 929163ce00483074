#include <iostream>

#include "umsim/cli.hpp"

int main(int argc, char** argv) {
  return umsim::cli_main(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
