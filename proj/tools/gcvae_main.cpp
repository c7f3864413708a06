#include <iostream>

#include "gcvae/cli.hpp"

int main(int argc, char** argv) { return gcvae::run_cli(argc, argv, std::cout, std::cerr); }
