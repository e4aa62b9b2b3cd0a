#include "quditcal/cli.hpp"

int main(int argc, char** argv) { return quditcal::run_cli(argc, argv); }
