#include <iostream>

#include "tripletlm/cli.hpp"

int main(int argc, char** argv) {
  return tripletlm::cli::run(argc, argv, std::cout, std::cerr);
}
