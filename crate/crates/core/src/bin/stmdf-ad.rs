fn main() {
    std::process::exit(stmdf_ad::cli::run(std::env::args_os()));
}
