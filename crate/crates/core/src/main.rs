fn main() {
    std::process::exit(graphtax::cli::main_with_args(std::env::args_os()));
}
