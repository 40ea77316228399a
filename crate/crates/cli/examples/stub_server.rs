//! Local chat-completion stand-in that answers with each sample's true scores.
//!
//! `cargo run -p gem-cli --example stub_server -- corpus.gemc [ADDR]`, then point
//! `endpoint` in the config at the printed URL with `predictor = remote`.

use std::collections::HashMap;

use gem_core::relranker::stub::{StubResponse, StubServer};
use gem_core::synthgen::{quantize_scores, Corpus};

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(corpus_path) = args.next() else {
        eprintln!("usage: stub_server CORPUS [ADDR]");
        std::process::exit(2);
    };
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:8089".into());
    let corpus = match Corpus::read(corpus_path.as_ref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            std::process::exit(e.exit_code());
        }
    };
    let fixtures: HashMap<usize, Vec<u8>> = corpus
        .samples
        .iter()
        .map(|s| (s.id, quantize_scores(s.id, &s.factors).scores))
        .collect();
    let server = StubServer::bind(&addr, move |req| match req.sample_id().and_then(|id| fixtures.get(&id)) {
        Some(scores) => StubResponse::scores(scores),
        None => StubResponse::status(404),
    })
    .unwrap_or_else(|e| {
        eprintln!("error[transport]: cannot bind {addr}: {e}");
        std::process::exit(4);
    });
    println!("{}", server.url());
    loop {
        std::thread::park();
    }
}
