#include <iostream>

#include "sarfsl/cli/commands.hpp"

int main(int argc, char** argv) { return sarfsl::cli::run(argc, argv, std::cout, std::cerr); }
