#include "sinkcpd/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sinkcpd::cli::run(argc, argv, std::cout, std::cerr); }
