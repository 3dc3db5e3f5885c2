fn main() {
    std::process::exit(impdiag_cli::run(std::env::args_os()));
}
