#include <iostream>

#include "cdnn/cli/app.hpp"

int main(int argc, char** argv) { return cdnn::cli::parse_and_dispatch(argc, argv, std::cout, std::cerr); }
