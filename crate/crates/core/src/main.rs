fn main() {
    std::process::exit(splitcorrect::cli::main_with_args(std::env::args_os()));
}
