fn main() {
    std::process::exit(rct_auroc_cli::run(std::env::args_os()));
}
