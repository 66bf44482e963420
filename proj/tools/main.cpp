#include <iostream>

#include "finsent/cli.hpp"

int main(int argc, char** argv) {
  return finsent::cli::run(argc, argv, std::cout, std::cerr);
}
