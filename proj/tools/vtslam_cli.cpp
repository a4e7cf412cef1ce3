#include "vtslam/cli.hpp"

int main(int argc, char** argv) { return vtslam::run_cli(argc, argv); }
