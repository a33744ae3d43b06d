fn main() {
    std::process::exit(cxrscreen_cli::dispatch(std::env::args_os()));
}
