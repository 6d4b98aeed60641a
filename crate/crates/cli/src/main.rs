fn main() {
    let code = discrete_stein_cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
