fn main() {
    std::process::exit(spp::cli::main());
}
