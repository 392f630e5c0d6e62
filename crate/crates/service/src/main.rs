fn main() {
    std::process::exit(cordsearch_service::cli::run(std::env::args_os()));
}
