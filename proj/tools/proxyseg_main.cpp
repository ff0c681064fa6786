#include "proxyseg/commands.hpp"

int main(int argc, char** argv) { return proxyseg::run_cli(argc, argv); }
