fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(g2flow::cli::run_cli(&args));
}
