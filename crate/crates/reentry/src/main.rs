fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = reentry::cli::main_with_args(&args, &mut std::io::stdout().lock());
    std::process::exit(code);
}
