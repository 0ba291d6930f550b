fn main() {
    std::process::exit(qvdp_cli::run(std::env::args_os()));
}
