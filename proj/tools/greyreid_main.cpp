#include <iostream>

#include "greyreid/cli.hpp"

int main(int argc, char** argv) { return greyreid::cli::run(argc, argv, std::cout, std::cerr); }
