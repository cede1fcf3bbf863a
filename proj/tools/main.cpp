#include <iostream>
#include <string>
#include <vector>

#include "litefs/cli.hpp"

int main(int argc, char** argv) {
  return litefs::cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
