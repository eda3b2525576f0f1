#include "vbgp/cli.hpp"

int main(int argc, char** argv) { return vbgp::run_cli(argc, argv); }
