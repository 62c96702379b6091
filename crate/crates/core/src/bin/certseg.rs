fn main() {
    std::process::exit(certseg::cli::main_with_args(std::env::args_os()));
}
