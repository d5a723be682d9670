#include <iostream>

#include "relunet/cli.hpp"

int main(int argc, char** argv) { return relunet::cli::run(argc, argv, std::cout, std::cerr); }
