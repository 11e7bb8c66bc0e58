#include <iostream>

#include "reqmetric/cli.hpp"

int main(int argc, char** argv) { return reqmetric::cli::run(argc, argv, std::cout, std::cerr); }
