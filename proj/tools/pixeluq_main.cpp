#include "pixeluq/cli.hpp"

int main(int argc, char** argv) { return pixeluq::run(argc, argv); }
