fn main() {
    qwm_cli::init_logging();
    let code = qwm_cli::run_cli(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
