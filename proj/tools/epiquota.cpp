#include "epiquota/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return epiquota::cli::run(argc, argv, std::cout, std::cerr); }
