#include <iostream>

#include "mila/cli/commands.hpp"

int main(int argc, char** argv) { return mila::cli::run(argc, argv, std::cout, std::cerr); }
