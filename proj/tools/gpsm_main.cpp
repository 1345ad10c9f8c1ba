#include <iostream>

#include "gpsm/cli.hpp"

int main(int argc, char** argv) { return gpsm::cli::run(argc, argv, std::cout, std::cerr); }
