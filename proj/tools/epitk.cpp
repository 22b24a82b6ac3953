#include <iostream>

#include "epitk/cli_io.hpp"

int main(int argc, char** argv)
{
    return epitk::cli::run_cli(argc, argv, std::cout, std::cerr);
}
