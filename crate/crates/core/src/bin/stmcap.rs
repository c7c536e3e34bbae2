fn main() {
    std::process::exit(stmcap::cli::main_with(std::env::args_os()));
}
