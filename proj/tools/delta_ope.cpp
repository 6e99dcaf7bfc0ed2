#include <iostream>

#include "deltaope/cli.hpp"

int main(int argc, char** argv) { return deltaope::cli::run(argc, argv, std::cout, std::cerr); }
