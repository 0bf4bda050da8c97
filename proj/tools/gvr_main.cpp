#include <iostream>
#include <string>
#include <vector>

#include "gvr/cli.hpp"

int main(int argc, char** argv) {
  return gvr::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
