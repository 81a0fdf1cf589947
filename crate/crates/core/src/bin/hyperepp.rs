fn main() {
    std::process::exit(hyperepp::cli::main_with_args(std::env::args_os()));
}
