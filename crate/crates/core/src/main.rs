fn main() {
    std::process::exit(conspec::cli::run(std::env::args_os()));
}
