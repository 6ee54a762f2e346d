fn main() {
    std::process::exit(parasync::cli::main_with_args(std::env::args_os()));
}
