#include <iostream>

#include "mdiff/app/commands.hpp"

int main(int argc, char** argv) { return mdiff::app::run_cli(argc, argv, std::cout, std::cerr); }
