#include <iostream>

#include "spectral_tower/cli.hpp"

int main(int argc, char** argv) { return spectral_tower::run_cli(argc, argv, std::cout, std::cerr); }
