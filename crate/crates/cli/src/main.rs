fn main() {
    std::process::exit(fairsvdd_cli::main_with_args(std::env::args_os()));
}
