fn main() {
    std::process::exit(qjh_cli::run(std::env::args_os()));
}
