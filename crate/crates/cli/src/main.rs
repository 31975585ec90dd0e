fn main() {
    std::process::exit(evdom_cli::run(std::env::args_os()));
}
