fn main() {
    std::process::exit(nillab::cli::main_from_env());
}
