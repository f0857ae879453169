fn main() {
    std::process::exit(tabinr_cli::cli::main_with_args(std::env::args_os()));
}
