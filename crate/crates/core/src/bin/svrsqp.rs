fn main() {
    std::process::exit(svrsqp::harness::cli_main(std::env::args_os()));
}
