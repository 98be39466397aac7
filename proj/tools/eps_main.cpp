#include "eps/cli.hpp"

int main(int argc, char** argv) { return eps::run_cli(argc, argv); }
