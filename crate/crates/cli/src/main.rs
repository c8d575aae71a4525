fn main() {
    std::process::exit(shl_cli::main_with_args(std::env::args_os()));
}
