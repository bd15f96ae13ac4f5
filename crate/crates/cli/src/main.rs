fn main() {
    std::process::exit(pg3_cli::main_with_args(std::env::args_os()));
}
