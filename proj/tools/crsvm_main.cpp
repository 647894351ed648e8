#include <iostream>

#include "crsvm/cli.hpp"

int main(int argc, char** argv) {
  return crsvm::cli::run(argc, argv, std::cout, std::cerr);
}
