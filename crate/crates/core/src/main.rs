fn main() {
    std::process::exit(permsym::cli::main_with_args(std::env::args_os()));
}
