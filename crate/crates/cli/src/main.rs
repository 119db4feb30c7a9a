fn main() {
    std::process::exit(spectracube_cli::run(std::env::args_os()));
}
