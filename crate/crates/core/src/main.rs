fn main() {
    std::process::exit(ttshield::harness::cli::main_with(std::env::args_os()));
}
