fn main() {
    std::process::exit(dshap_cli::run(std::env::args_os()));
}
