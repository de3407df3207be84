fn main() {
    std::process::exit(ofmfa_cli::run(std::env::args_os()));
}
