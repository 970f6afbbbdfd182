#include "pathwatch/cli.hpp"

int main(int argc, char** argv) { return pathwatch::run_cli(argc, argv); }
