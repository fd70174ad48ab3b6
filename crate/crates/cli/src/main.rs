use clap::Parser;
use fracbubble_cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Some(m)) => {
            for c in &m.checks {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            println!("{} files + manifest.json, config {}", m.files.len(), &m.config_digest[..12]);
            std::process::exit(exit_code(&m));
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("fracbubble: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
