#include "smartcpd/cli.hpp"

int main(int argc, char** argv) { return smartcpd::run_cli(argc, argv); }
