//! Trainer worker that scores genomes with the surrogate landscape instead of
//! training them. Speaks the evaluation line protocol on stdio or TCP.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use clap::Parser;
use gennet_core::fitness::surrogate_fitness;
use gennet_core::{EvaluationRequest, EvaluationResult};
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "gennet-surrogate-worker", version, about = "Surrogate-scoring trainer worker")]
struct Cli {
    /// `stdio` or `tcp:PORT`.
    #[arg(long, default_value = "stdio")]
    transport: String,
}

/// Response line for one request line.
fn respond(line: &str) -> String {
    let response = match serde_json::from_str::<EvaluationRequest>(line) {
        Ok(request) => {
            let mut result = EvaluationResult::ok(request.id, surrogate_fitness(&request.genome));
            result.epochs_run = Some(0);
            result.wall_seconds = Some(0.0);
            serde_json::to_value(result).expect("results always serialize")
        }
        Err(e) => {
            let id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(Value::as_str).map(str::to_string));
            serde_json::json!({"id": id, "status": "error", "message": format!("malformed request: {e}")})
        }
    };
    response.to_string()
}

fn serve(reader: impl BufRead, mut writer: impl Write) -> io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(writer, "{}", respond(&line))?;
        writer.flush()?;
    }
    Ok(())
}

fn main() -> io::Result<()> {
    let cli = Cli::parse();
    match cli.transport.strip_prefix("tcp:") {
        None if cli.transport == "stdio" => serve(io::stdin().lock(), io::stdout().lock()),
        None => Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("unknown transport `{}` (expected stdio or tcp:PORT)", cli.transport),
        )),
        Some(port) => {
            let listener = TcpListener::bind(("127.0.0.1", port.parse::<u16>().map_err(io::Error::other)?))?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                thread::spawn(move || {
                    let reader = BufReader::new(stream.try_clone()?);
                    serve(reader, stream)
                });
            }
            Ok(())
        }
    }
}
