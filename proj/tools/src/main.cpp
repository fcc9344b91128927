#include "commands.hpp"

int main(int argc, char** argv) { return fracinterp::app::run_cli(argc, argv); }
