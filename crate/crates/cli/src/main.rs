fn main() {
    std::process::exit(ifmsim::main_with_args(std::env::args_os()));
}
