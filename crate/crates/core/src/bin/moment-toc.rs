fn main() {
    std::process::exit(moment_toc::cli::main_entry());
}
