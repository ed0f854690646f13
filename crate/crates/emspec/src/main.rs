fn main() {
    std::process::exit(emspec::cli::main_with_args(std::env::args_os()));
}
