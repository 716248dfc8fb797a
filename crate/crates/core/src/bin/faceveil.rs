fn main() {
    std::process::exit(faceveil::cli::main_with_args(std::env::args_os()));
}
