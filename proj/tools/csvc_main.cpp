#include "cli_app.hpp"

int main(int argc, char** argv) { return csvc::cli::run(argc, argv); }
