#include <iostream>

#include "cqfm/commands.hpp"

int main(int argc, char** argv) { return cqfm::run_cli(argc, argv, std::cout, std::cerr); }
