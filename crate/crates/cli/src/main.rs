fn main() {
    std::process::exit(dynamo_cli::main_with_args(std::env::args_os()));
}
