fn main() {
    std::process::exit(bx_cli::run(std::env::args_os()));
}
