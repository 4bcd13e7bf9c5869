#include <iostream>

#include "drgnn/cli.hpp"

int main(int argc, char** argv) { return drgnn::cli::run(argc, argv, std::cout, std::cerr); }
