// SPDX-License-Identifier: Apache-2.0

#include "risplan/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return risplan::run_command(argc, argv, std::cout, std::cerr);
}
