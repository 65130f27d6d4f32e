// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/cli/cli.hpp"

int main(int argc, char** argv) { return lgtse::cli::run(argc, argv); }
