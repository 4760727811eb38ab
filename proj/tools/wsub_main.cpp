#include "wsub/cli.hpp"

int main(int argc, char** argv) { return wsub::run_cli(argc, argv); }
