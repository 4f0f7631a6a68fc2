#include "gforge/cli.hpp"

int main(int argc, char** argv) { return gforge::run_cli(argc, argv); }
