fn main() {
    std::process::exit(rabi_core::cli::main_with_args(std::env::args_os()));
}
