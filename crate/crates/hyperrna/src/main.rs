fn main() {
    std::process::exit(hyperrna::cli::main_entry());
}
