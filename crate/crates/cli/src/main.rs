fn main() {
    let status = sgf_cli::run(std::env::args_os());
    std::process::exit(status.code);
}
