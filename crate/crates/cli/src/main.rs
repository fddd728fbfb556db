fn main() {
    std::process::exit(har_cli::run(std::env::args_os()));
}
