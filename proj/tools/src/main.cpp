#include <iostream>

#include "batchrl/cli.hpp"

int main(int argc, char** argv) { return batchrl::cli::run(argc, argv, std::cout, std::cerr); }
