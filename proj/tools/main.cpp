#include "ghnforge/cli/cli.hpp"

int main(int argc, char** argv) { return ghnforge::cli_run(argc, argv); }
