fn main() {
    std::process::exit(elastic_complex::cli::main_with_args(std::env::args_os()));
}
