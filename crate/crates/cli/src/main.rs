fn main() {
    std::process::exit(robust_classo_cli::main_with_args(std::env::args_os()));
}
