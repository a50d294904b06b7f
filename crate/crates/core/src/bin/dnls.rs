fn main() {
    std::process::exit(distorted_nls::cli::main_with_args(std::env::args_os()));
}
