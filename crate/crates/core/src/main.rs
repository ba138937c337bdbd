fn main() {
    std::process::exit(mapber::cli::main_with_args(std::env::args_os()));
}
