#include "ldplab/cli.hpp"

int main(int argc, char** argv) { return ldplab::run_cli(argc, argv); }
