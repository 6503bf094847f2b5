#include <meevc/cli.hpp>

int main(int argc, char** argv) { return meevc::run_cli(argc, argv); }
