fn main() {
    std::process::exit(nocturne_cli::run(std::env::args_os()));
}
