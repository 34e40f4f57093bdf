#include <iostream>

#include "ctr/cli.hpp"

int main(int argc, char** argv) { return ctr::cli::run(argc, argv, std::cout, std::cerr); }
