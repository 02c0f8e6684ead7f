fn main() {
    std::process::exit(metablend_service::cli::main());
}
