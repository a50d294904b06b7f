//! Narrow barriers of fixed area against the delta potential.
//!
//! ```bash
//! cargo run --release --example delta-limit [config]
//! ```

use distorted_nls::cli::delta_report;
use distorted_nls::runstore::RunConfig;

fn main() -> distorted_nls::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => RunConfig::load(p.as_ref())?,
        None => RunConfig::default(),
    };
    let rep = delta_report(&cfg)?;
    println!("q = {}", rep.q);
    for (eps, d) in &rep.rows {
        println!("ε = {eps:<6} sup |T_ε - T_δ| = {d:.4e}");
    }
    Ok(())
}
