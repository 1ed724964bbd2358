use clap::Parser;

fn main() {
    let cli = match mincurv::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version are not errors
            std::process::exit(if e.use_stderr() { 2 } else { 0 });
        }
    };
    std::process::exit(mincurv::run(&cli));
}
