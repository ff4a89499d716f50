fn main() {
    std::process::exit(clot::cli::main_with(std::env::args_os()));
}
