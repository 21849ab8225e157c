use clap::Parser;
use revlab_cli::{run, write_error, Cli};

fn main() {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("REVLAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: REVLAB_THREADS: expected a positive integer, got `{v}`");
                std::process::exit(3);
            }
        }
    }
    match run(&cli) {
        Ok(status) => {
            println!("{}", serde_json::to_string(&status).expect("status serializes"));
            std::process::exit(status.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            write_error(&cli.out, &e);
            std::process::exit(e.exit_code());
        }
    }
}
