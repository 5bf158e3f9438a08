fn main() {
    std::process::exit(bms_cli::main_with_args(std::env::args_os()));
}
