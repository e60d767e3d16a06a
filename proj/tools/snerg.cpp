// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/cli.hpp>

int main(int argc, char** argv)
{
    return snerg::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
