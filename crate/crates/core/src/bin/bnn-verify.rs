fn main() {
    std::process::exit(bnn_verify::cli::main_with_args(std::env::args_os()));
}
