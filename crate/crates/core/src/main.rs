fn main() {
    std::process::exit(optbound::cli::main_entry());
}
