//! Linear decay rates for the default barrier and the free flow.
//!
//! ```bash
//! cargo run --release --example decay-fit [config]
//! ```

use distorted_nls::cli::decay_report;
use distorted_nls::runstore::RunConfig;

fn main() -> distorted_nls::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => RunConfig::load(p.as_ref())?,
        None => RunConfig::default(),
    };
    let rep = decay_report(&cfg)?;
    for (name, s) in &rep.series {
        println!("{name:<32} slope {:>8.4}  ci [{:.4}, {:.4}]", s.fitted_slope, s.slope_ci.0, s.slope_ci.1);
    }
    for p in &rep.pdo {
        println!("pdo {:?}: norms {:?} bounded {}", p.symbol, p.norms, p.bounded);
    }
    Ok(())
}
