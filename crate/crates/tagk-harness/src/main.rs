fn main() {
    std::process::exit(tagk_harness::cli::main_entry(std::env::args_os()));
}
