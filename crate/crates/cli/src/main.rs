fn main() {
    std::process::exit(tsinfer_cli::run(std::env::args_os()));
}
