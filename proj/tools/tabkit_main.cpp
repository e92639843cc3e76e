#include <iostream>

#include "tabkit/cli.hpp"

int main(int argc, char** argv) {
  return tabkit::cli_main(argc, argv, std::cout, std::cerr);
}
