fn main() {
    std::process::exit(memdecay::cli::main_with_args(std::env::args_os()));
}
