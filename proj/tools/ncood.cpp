#include "commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return ncood::cli::run(argc, argv, std::cout, std::cerr); }
