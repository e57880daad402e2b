fn main() {
    std::process::exit(ope_engine::cli::main_with_args(std::env::args_os()));
}
