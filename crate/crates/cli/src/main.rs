fn main() {
    std::process::exit(microgest_cli::run(std::env::args_os()));
}
