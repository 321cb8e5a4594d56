#include <iostream>

#include "volformer/cli.hpp"

int main(int argc, char** argv) {
  return volformer::run_cli(argc, argv, std::cout, std::cerr);
}
